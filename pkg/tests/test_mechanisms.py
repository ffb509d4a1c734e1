import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from madp import mechanisms as mech
from madp import privacy, selection
from madp import workloads as wl
from madp.errors import DimensionError, PreconditionError
from madp.mechanisms import AnalystProfile, BucketSet, bucket_insert

from conftest import seeds

SEL = selection.select_catalog


def cohort(*kinds, n=4):
    return mech.equal_weight_profiles([wl.builtin_workload(k, n) for k in kinds])


def random_cohort(rng, n_max=16, k_max=5):
    n = int(rng.choice([2, 4, 8, 16][: int(np.log2(n_max))]))
    k = int(rng.integers(2, k_max + 1))
    kinds = ["identity", "total", "prefix", "h2", "custom", "singleton"]
    ws = []
    for _ in range(k):
        kind = kinds[int(rng.integers(0, len(kinds)))]
        if kind == "custom":
            ws.append(wl.random_custom_workload(n, rng))
        elif kind == "singleton":
            ws.append(wl.builtin_workload(kind, n, int(rng.integers(0, n))))
        else:
            ws.append(wl.builtin_workload(kind, n))
    return mech.equal_weight_profiles(ws)


def test_profiles_validate():
    with pytest.raises(PreconditionError):
        AnalystProfile(0, wl.builtin_workload("total", 2), 0.0)
    with pytest.raises(PreconditionError):
        mech.check_weights([AnalystProfile(0, wl.builtin_workload("total", 2), 0.4)])


def test_independent_plan():
    plan = mech.plan_independent(cohort("total", "identity"), 1.0, SEL)
    assert [sp.budget.epsilon for sp in plan.sub_plans] == [0.5, 0.5]
    assert plan.total_budget() == pytest.approx(1.0)
    assert mech.plan_expected_errors(plan)[0] == pytest.approx(8.0)


def test_identity_plan():
    plan = mech.plan_identity(cohort("identity", "total"), 1.0)
    errs = mech.plan_expected_errors(plan)
    assert errs == pytest.approx({0: 8.0, 1: 8.0})
    other = mech.plan_identity(cohort("prefix", "h2"), 1.0)
    assert np.array_equal(other.sub_plans[0].strategy.matrix, plan.sub_plans[0].strategy.matrix)


def test_dimension_mismatch():
    ps = [AnalystProfile(0, wl.builtin_workload("total", 2), 0.5),
          AnalystProfile(1, wl.builtin_workload("total", 3), 0.5)]
    with pytest.raises(DimensionError):
        mech.plan_identity(ps, 1.0)


def test_independent_weights():
    w = mech.compute_independent_weights(cohort("total", "total"), 1.0, SEL)
    assert w == pytest.approx([1 / 8, 1 / 8])


def test_weight_scaling_keeps_selection():
    ps = cohort("identity", "total", "prefix", n=8)
    base = mech.plan_utilitarian(ps, 1.0, SEL, [1.0, 2.0, 3.0]).sub_plans[0].strategy
    scaled = mech.plan_utilitarian(ps, 1.0, SEL, [5.0, 10.0, 15.0]).sub_plans[0].strategy
    assert base == scaled


def test_utilitarian_identity_total():
    ps = cohort("identity", "total", n=16)
    plan = mech.plan_utilitarian(ps, 1.0, SEL)
    assert np.array_equal(plan.sub_plans[0].strategy.matrix, np.eye(16))
    ratio = mech.plan_expected_errors(plan)[1] / mech.plan_expected_errors(
        mech.plan_independent(ps, 1.0, SEL))[1]
    assert ratio == pytest.approx(4.0, rel=1e-9)


def test_utilitarian_single_analyst_matches_independent():
    ps = mech.equal_weight_profiles([wl.builtin_workload("prefix", 8)])
    a = mech.plan_expected_errors(mech.plan_utilitarian(ps, 1.0, SEL))
    b = mech.plan_expected_errors(mech.plan_independent(ps, 1.0, SEL))
    assert a == pytest.approx(b)


def test_weighted_utilitarian_reconstructs_original():
    ps = cohort("identity", "total", n=8)
    plan = mech.plan_weighted_utilitarian(ps, 1.0, SEL)
    assert plan.kind == "WeightedUtilitarian"
    assert plan.reconstruction[1][1] == ps[1].workload


def test_bucket_examples():
    b = bucket_insert(BucketSet(), [1.0, 0.0], 0.0)
    assert len(b) == 1 and np.array_equal(b.sums[0], [1, 0])
    b = BucketSet()
    bucket_insert(b, [2.0, 0.0], 0.0)
    bucket_insert(b, [1.0, 0.0], 0.0)
    assert len(b) == 1 and np.array_equal(b.sums[0], [3, 0])
    b = bucket_insert(BucketSet(), [1.0, 0.0], 0.0)
    bucket_insert(b, [1.0, 1.0], 0.0)
    assert len(b) == 2
    bucket_insert(b, [1.0, 1.0], 0.3)            # 1 - cos = 0.29 vs the first bucket
    assert len(b) == 2 and np.array_equal(b.sums[0], [2, 1])
    with pytest.raises(PreconditionError):
        bucket_insert(b, [0.0, 0.0], 0.0)
    with pytest.raises(PreconditionError):
        bucket_insert(b, [1.0, 0.0], 1.5)


def test_bucket_first_match_wins():
    b = BucketSet()
    bucket_insert(b, [1.0, 0.0], 0.0)
    bucket_insert(b, [0.0, 1.0], 0.0)
    bucket_insert(b, [1.0, 1.0], 0.5)            # within tolerance of both; first bucket wins
    assert np.array_equal(b.sums[0], [2, 1]) and np.array_equal(b.sums[1], [0, 1])


@given(st.lists(st.lists(st.floats(0, 5), min_size=3, max_size=3), min_size=1, max_size=12),
       st.sampled_from([0.0, 1e-3, 0.1, 0.5]))
def test_bucket_sums_are_member_sums(vs, tau):
    b = BucketSet()
    for v in vs:
        if np.any(v):
            bucket_insert(b, v, tau)
    for members, s in zip(b.members, b.sums):
        assert np.allclose(np.sum(members, axis=0), s)


def test_cosine_distance():
    u = np.array([1.0, 0.0])
    assert mech.cosine_distance(u, np.array([3.0, 0.0])) == 0.0
    assert mech.cosine_distance(u, np.array([1.0, 1.0])) == pytest.approx(1 - 1 / np.sqrt(2))


@pytest.mark.parametrize("k", [2, 5, 10])
def test_identical_total_pooling(k):
    ps = mech.equal_weight_profiles([wl.builtin_workload("total", 8)] * k)
    plan = mech.plan_waterfilling(ps, 1.0, SEL, tau=0.0)
    assert plan.sub_plans[0].strategy.shape == (1, 8)
    assert mech.plan_expected_errors(plan) == pytest.approx({i: 2.0 for i in range(k)}, rel=1e-12)
    ind = mech.plan_expected_errors(mech.plan_independent(ps, 1.0, SEL))
    assert ind == pytest.approx({i: 2.0 * k * k for i in range(k)}, rel=1e-12)


def test_disjoint_singletons():
    ps = mech.equal_weight_profiles([wl.builtin_workload("singleton", 2, 0),
                                     wl.builtin_workload("singleton", 2, 1)])
    sel = mech.select_strategies(ps, SEL)
    # each selection is its singleton row plus a unit row for the untouched cell
    assert np.allclose(sel[0].matrix, np.eye(2))
    a = mech.waterfill_strategy(ps, sel, 0.0).matrix
    assert np.allclose(a, np.diag([0.5, 0.5]) + np.diag([0.5, 0.5]))
    # the bare rows diag(0.5, 0.5) give the same error by scale invariance
    for p in ps:
        assert privacy.expected_error(p.workload, a, 1.0) == pytest.approx(
            privacy.expected_error(p.workload, np.diag([0.5, 0.5]), 1.0))


def test_waterfilling_rejects_unnormalized():
    ps = cohort("prefix", "total")
    raw = {0: wl.prefix(4), 1: np.ones((1, 4))}
    with pytest.raises(PreconditionError):
        mech.plan_waterfilling(ps, 1.0, strategies=raw)


@given(seeds)
def test_waterfilling_sensitivity(seed):
    rng = np.random.default_rng(seed)
    ps = random_cohort(rng)
    plan = mech.plan_waterfilling(ps, 1.0, SEL, tau=0.0)
    a = plan.sub_plans[0].strategy
    assert a.sensitivity == pytest.approx(1.0, abs=1e-9)
    meas = privacy.measure(a, np.zeros(a.n), plan.sub_plans[0].budget, np.random.default_rng(0))
    assert meas.noise_scale == pytest.approx(1.0, abs=1e-9)


@given(seeds)
def test_waterfilling_sharing_incentive(seed):
    ps = random_cohort(np.random.default_rng(seed))
    st_ = mech.select_strategies(ps, SEL)
    wf = mech.plan_expected_errors(mech.plan_waterfilling(ps, 1.0, strategies=st_, tau=0.0))
    ind = mech.plan_expected_errors(mech.plan_independent(ps, 1.0, strategies=st_))
    for i in wf:
        assert wf[i] <= ind[i] * (1 + 1e-9)


@given(seeds)
def test_waterfilling_monotone_in_analysts(seed):
    rng = np.random.default_rng(seed)
    ps = random_cohort(rng, k_max=4)
    extra = wl.random_custom_workload(ps[0].workload.n, rng)
    k = len(ps)
    ws = [p.workload for p in ps]
    # existing analysts keep weight 1/(k+1); without the newcomer the cohort runs at k/(k+1) eps
    small = [AnalystProfile(i, w, 1.0 / (k + 1)) for i, w in enumerate(ws)]
    big = small + [AnalystProfile(k, extra, 1.0 / (k + 1))]
    st_ = mech.select_strategies(big, SEL)
    eps_small = k / (k + 1)
    e_small = mech.plan_expected_errors(mech.plan_waterfilling(small, eps_small, strategies=st_, tau=0.0))
    e_big = mech.plan_expected_errors(mech.plan_waterfilling(big, 1.0, strategies=st_, tau=0.0))
    for i in e_small:
        assert e_big[i] <= e_small[i] * (1 + 1e-9)


def test_execute_noiseless_and_seeded():
    ps = cohort("prefix", "total", "identity")
    x = np.array([3.0, 1.0, 4.0, 1.0])
    for kind in mech.KINDS:
        plan = mech.build_plan(kind, ps, 1.0, SEL, tau=0.0)
        rel = mech.execute_plan(plan, x, None, noiseless=True)
        for p in ps:
            assert np.allclose(rel.answers[p.id], p.workload.matrix @ x)
        a = mech.execute_plan(plan, x, np.random.default_rng(5))
        b = mech.execute_plan(plan, x, np.random.default_rng(5))
        for p in ps:
            assert np.array_equal(a.answers[p.id], b.answers[p.id])


def test_execute_monte_carlo():
    ps = cohort("prefix", "total", "h2")
    plan = mech.plan_waterfilling(ps, 1.0, SEL, tau=0.0)
    x = np.array([5.0, 0.0, 2.0, 7.0])
    rng = np.random.default_rng(8)
    sq = {p.id: 0.0 for p in ps}
    reps = 10_000
    for _ in range(reps):
        rel = mech.execute_plan(plan, x, rng)
        for p in ps:
            sq[p.id] += np.sum((rel.answers[p.id] - p.workload.matrix @ x) ** 2)
    expect = mech.plan_expected_errors(plan)
    for p in ps:
        assert sq[p.id] / reps == pytest.approx(expect[p.id], rel=0.05)


def test_unknown_kind():
    with pytest.raises(PreconditionError):
        mech.build_plan("Bogus", cohort("total", "total"), 1.0, SEL)


@pytest.mark.parametrize("kind", mech.KINDS)
def test_plan_roundtrip(tmp_path, kind):
    ps = cohort("prefix", "total", "identity")
    plan = mech.build_plan(kind, ps, 1.0, SEL, tau=1e-3)
    mech.save_plan(plan, tmp_path / "p.json")
    back = mech.load_plan(tmp_path / "p.json")
    assert back.kind == kind and back.tau == plan.tau
    assert mech.plan_expected_errors(back) == pytest.approx(mech.plan_expected_errors(plan), rel=1e-12)
    assert [p.weight for p in mech.profiles_from_plan(back)] == pytest.approx([1 / 3] * 3)
