import numpy as np
import pytest
from hypothesis import given, settings

from madp import matcore, privacy, selection
from madp import workloads as wl
from madp.errors import PreconditionError

from conftest import seeds


def brute_catalog(w):
    """Independent oracle: candidate errors from the closed form, catalog order."""
    n = w.n
    cands = [("identity", np.eye(n)), ("total", np.ones((1, n))),
             ("prefix", matcore.normalize_columns(wl.prefix(n)))]
    if n & (n - 1) == 0:
        cands.append(("h2", matcore.normalize_columns(wl.h2(n))))
    out = {}
    for name, a in cands:
        ap = np.linalg.pinv(a)
        if np.linalg.norm(w.matrix - w.matrix @ ap @ a) > 1e-6 * max(1, np.linalg.norm(w.matrix)):
            continue
        out[name] = 2 * np.abs(a).sum(0).max() ** 2 * np.sum((w.matrix @ ap) ** 2)
    return out


def test_complete_strategy_pads_zero_columns():
    s = selection.complete_strategy([[1.0, 0.0, 2.0], [1.0, 0.0, 0.0]])
    assert s.columns_normalized()
    assert s.shape == (3, 3)
    w = np.array([[1.0, 0.0, 1.0]])
    # padding row never changes the error for workloads that ignore the column
    assert privacy.expected_error(w, s, 1.0) == pytest.approx(
        2.0 * matcore.frobenius_sq(w @ np.linalg.pinv(s.matrix)))


def test_identity_selector():
    s = selection.select_identity(wl.builtin_workload("total", 4))
    assert np.array_equal(s.matrix, np.eye(4))
    assert s.sensitivity == 1
    assert privacy.expected_error(wl.builtin_workload("total", 4), s, 1) == pytest.approx(8.0)


@pytest.mark.parametrize("w, expect", [
    (wl.builtin_workload("identity", 8), "identity"),
    (wl.builtin_workload("total", 8), "total"),
    (wl.builtin_workload("identity", 16), "identity"),
    (wl.builtin_workload("total", 16), "total"),
])
def test_catalog_picks(w, expect):
    errs = brute_catalog(w)
    assert min(errs, key=errs.get) == expect
    s = selection.select_catalog(w)
    assert privacy.expected_error(w, s, 1.0) == pytest.approx(errs[expect])
    assert s.label.lower() == expect


def test_catalog_h2_small_domain():
    # on n=4 identity beats the normalized hierarchy: ||H2||_F^2 = 12 gives 24
    w = wl.h2_workload(4)
    errs = brute_catalog(w)
    assert errs["identity"] == pytest.approx(24.0)
    assert errs["h2"] > errs["identity"]
    assert selection.select_catalog(w).label == "Identity"


@given(seeds)
def test_catalog_is_minimum(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.choice([2, 3, 4, 8]))
    w = wl.random_custom_workload(n, rng)
    s = selection.select_catalog(w)
    e = privacy.expected_error(w, s, 1.0)
    assert s.columns_normalized()
    assert e <= min(brute_catalog(w).values()) * (1 + 1e-9)


def test_p_identity_loss_matches_direct():
    rng = np.random.default_rng(0)
    for p, n in [(2, 5), (5, 5), (7, 4)]:
        theta = rng.random((p, n))
        w = rng.normal(size=(3, n))
        a = matcore.normalize_columns(np.vstack([np.eye(n), theta]))
        direct = np.sum((w @ np.linalg.pinv(a)) ** 2)
        assert selection.p_identity_loss(theta, w, grad=False) == pytest.approx(direct, rel=1e-9)


@given(seeds)
@settings(max_examples=25)
def test_gradient_check(seed):
    rng = np.random.default_rng(seed)
    theta = rng.random((4, 4)) + 0.05
    w = rng.normal(size=(4, 4))
    _, g = selection.p_identity_loss(theta, w)
    h = 1e-5
    fd = np.zeros_like(theta)
    for idx in np.ndindex(*theta.shape):
        e = np.zeros_like(theta)
        e[idx] = h
        fd[idx] = (selection.p_identity_loss(theta + e, w, grad=False)
                   - selection.p_identity_loss(theta - e, w, grad=False)) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-4 * max(np.linalg.norm(fd), 1e-8)


@pytest.mark.parametrize("kind, bound", [("identity", 2 * 8), ("total", 2.0)])
def test_p_identity_catalog_floor(kind, bound):
    w = wl.builtin_workload(kind, 8)
    s = selection.select_p_identity(w, restarts=2, iters=50, rng=np.random.default_rng(0))
    assert s.columns_normalized()
    assert privacy.expected_error(w, s, 1.0) <= bound + 1e-6


def test_p_identity_improves_prefix():
    w = wl.builtin_workload("prefix", 32)
    cat = privacy.expected_error(w, selection.select_catalog(w), 1.0)
    opt = privacy.expected_error(w, selection.select_p_identity(w, restarts=2, iters=100,
                                                                rng=np.random.default_rng(1)), 1.0)
    assert opt < cat


def test_p_identity_deterministic():
    w = wl.random_custom_workload(8, np.random.default_rng(4))
    a = selection.select_p_identity(w, p=4, restarts=2, iters=30, rng=np.random.default_rng(3))
    b = selection.select_p_identity(w, p=4, restarts=2, iters=30, rng=np.random.default_rng(3))
    assert a == b
    sel = selection.make_selector("p_identity", p=4, restarts=2, iters=30, seed=11)
    assert sel(w) == sel(w)


def test_p_identity_without_injection_is_normalized():
    w = wl.all_m_way_marginals(4, 1)[0]
    s = selection.select_p_identity(w, p=4, restarts=1, iters=20, rng=np.random.default_rng(0),
                                    inject_catalog=False)
    assert s.columns_normalized()
    assert s.shape[0] >= w.n


def test_bad_arguments():
    with pytest.raises(PreconditionError):
        selection.optimize_p_identity(wl.builtin_workload("total", 3), -1, 1, 1, np.random.default_rng(0))
    with pytest.raises(PreconditionError):
        selection.make_selector("nope")
