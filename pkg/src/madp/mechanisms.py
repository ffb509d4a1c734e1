"""The five multi-analyst mechanisms as data-independent plans.

A plan fixes every strategy matrix and sub-budget up front; executing it is
the only step that touches data or randomness, and per-analyst analytical
errors are read straight off the plan.

Analyst weights need not sum to one. A cohort with weights s and budget eps
treats analyst i as entitled to ``s_i / sum(s) * eps``, which is what the
interference metric needs when it drops an analyst and shrinks the budget to
``(1 - s_i) eps``.
"""
import inspect
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Sequence

import numpy as np

from . import matcore, privacy
from .errors import DimensionError, PreconditionError
from .privacy import Measurement, PrivacyBudget
from .strategy import Strategy, as_strategy
from .workloads import Workload, stack_workloads

KINDS = ("Independent", "Identity", "Utilitarian", "WeightedUtilitarian", "Waterfilling")
SELECT_FIRST = ("Independent", "Waterfilling")
COLLECT_FIRST = ("Utilitarian", "WeightedUtilitarian")

# slack on 1 - cosine so exactly colinear rows match despite rounding
COLINEAR_SLACK = 1e-20


@dataclass(frozen=True, eq=False)
class AnalystProfile:
    id: int
    workload: Workload
    weight: float

    def __post_init__(self):
        if not self.weight > 0:
            raise PreconditionError(f"analyst {self.id} has non-positive weight {self.weight}")


def equal_weight_profiles(workloads: Sequence[Workload]) -> List[AnalystProfile]:
    k = len(workloads)
    return [AnalystProfile(i, w, 1.0 / k) for i, w in enumerate(workloads)]


def check_weights(profiles: Sequence[AnalystProfile], tol: float = 1e-9):
    total = sum(p.weight for p in profiles)
    if abs(total - 1.0) > tol:
        raise PreconditionError(f"cohort weights sum to {total}, expected 1")


@dataclass(frozen=True, eq=False)
class SubPlan:
    strategy: Strategy
    budget: PrivacyBudget
    serves: tuple


@dataclass(eq=False)
class MechanismPlan:
    kind: str
    sub_plans: List[SubPlan]
    # analyst id -> (sub-plan index, workload)
    reconstruction: Dict[int, tuple]
    epsilon: float
    weights: Dict[int, float] = field(default_factory=dict)
    selected: Dict[int, Strategy] = field(default_factory=dict)
    tau: float = None

    @property
    def analyst_ids(self):
        return sorted(self.reconstruction)

    def total_budget(self) -> float:
        return float(sum(sp.budget.epsilon for sp in self.sub_plans))


@dataclass(eq=False)
class Release:
    answers: Dict[int, np.ndarray]
    measurements: List[Measurement]


# ---------------------------------------------------------------------------
# selection helpers
# ---------------------------------------------------------------------------

def _call_selector(selector, w: Workload, rng):
    if rng is not None and "rng" in _params(selector):
        return as_strategy(selector(w, rng=rng))
    return as_strategy(selector(w))


def _params(fn):
    try:
        return inspect.signature(fn).parameters
    except (TypeError, ValueError):
        return {}


def select_strategies(profiles: Sequence[AnalystProfile], selector,
                      rng: np.random.Generator = None) -> Dict[int, Strategy]:
    """Run the selector once per analyst.

    When ``rng`` is given and the selector accepts one, each analyst gets an
    independent child stream, spawned in ascending id order.
    """
    ordered = sorted(profiles, key=lambda p: p.id)
    streams = rng.spawn(len(ordered)) if rng is not None else [None] * len(ordered)
    return {p.id: _call_selector(selector, p.workload, s) for p, s in zip(ordered, streams)}


def _shares(profiles):
    total = sum(p.weight for p in profiles)
    return {p.id: p.weight / total for p in profiles}


def _check_n(profiles):
    ns = {p.workload.n for p in profiles}
    if len(ns) != 1:
        raise DimensionError(f"analyst workloads disagree on domain size: {sorted(ns)}")
    return ns.pop()


def _strategies_for(profiles, selector, strategies):
    if strategies is None:
        if selector is None:
            raise PreconditionError("need either a selector or fixed strategies")
        return select_strategies(profiles, selector)
    missing = [p.id for p in profiles if p.id not in strategies]
    if missing:
        raise PreconditionError(f"no fixed strategy for analysts {missing}")
    return {p.id: as_strategy(strategies[p.id]) for p in profiles}


# ---------------------------------------------------------------------------
# plans
# ---------------------------------------------------------------------------

def plan_independent(profiles, eps: float, selector=None, strategies=None) -> MechanismPlan:
    """Each analyst answers their own workload with their share of the budget."""
    _check_n(profiles)
    strategies = _strategies_for(profiles, selector, strategies)
    shares = _shares(profiles)
    subs, recon = [], {}
    for p in sorted(profiles, key=lambda p: p.id):
        subs.append(SubPlan(strategies[p.id], PrivacyBudget(shares[p.id] * eps), (p.id,)))
        recon[p.id] = (len(subs) - 1, p.workload)
    return MechanismPlan("Independent", subs, recon, eps,
                         {p.id: p.weight for p in profiles}, dict(strategies))


def _single(kind, profiles, strategy, eps, **extra):
    ids = tuple(sorted(p.id for p in profiles))
    recon = {p.id: (0, p.workload) for p in profiles}
    return MechanismPlan(kind, [SubPlan(strategy, PrivacyBudget(eps), ids)], recon, eps,
                         {p.id: p.weight for p in profiles}, **extra)


def plan_identity(profiles, eps: float) -> MechanismPlan:
    n = _check_n(profiles)
    return _single("Identity", profiles, Strategy(np.eye(n), "Identity"), eps)


def compute_independent_weights(profiles, eps: float, selector=None, strategies=None) -> List[float]:
    """Inverse of each analyst's expected error under the Independent mechanism."""
    strategies = _strategies_for(profiles, selector, strategies)
    shares = _shares(profiles)
    out = []
    for p in sorted(profiles, key=lambda p: p.id):
        err = privacy.expected_error(p.workload, strategies[p.id], shares[p.id] * eps)
        if not err > 0:
            raise PreconditionError(f"analyst {p.id} has zero independent error; weight undefined")
        out.append(1.0 / err)
    return out


def plan_utilitarian(profiles, eps: float, selector, weights: Sequence[float] = None) -> MechanismPlan:
    """Select one strategy for the (optionally weighted) stack of all workloads.

    Weights only shape the selection; each analyst is still answered on their
    original workload.
    """
    _check_n(profiles)
    ordered = sorted(profiles, key=lambda p: p.id)
    if weights is None:
        kind, scales = "Utilitarian", [1.0] * len(ordered)
    else:
        if len(weights) != len(ordered):
            raise DimensionError(f"{len(ordered)} analysts but {len(weights)} workload weights")
        kind, scales = "WeightedUtilitarian", list(weights)
    stacked = stack_workloads([p.workload for p in ordered], scales)
    strategy = _call_selector(selector, stacked, None)
    return _single(kind, profiles, strategy, eps)


def plan_weighted_utilitarian(profiles, eps: float, selector, strategies=None) -> MechanismPlan:
    w = compute_independent_weights(profiles, eps, selector, strategies)
    plan = plan_utilitarian(profiles, eps, selector, w)
    return plan


# ---------------------------------------------------------------------------
# waterfilling
# ---------------------------------------------------------------------------

@dataclass
class BucketSet:
    """Buckets of colinear query rows, kept in creation order."""
    members: List[List[np.ndarray]] = field(default_factory=list)
    sums: List[np.ndarray] = field(default_factory=list)
    # unit vector of each running sum, one row per bucket (grown geometrically)
    _units: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.sums)

    def matrix(self) -> np.ndarray:
        return np.vstack(self.sums)

    def _set_unit(self, i: int, u: np.ndarray):
        if self._units is None:
            self._units = np.empty((16, u.size))
        elif i >= self._units.shape[0]:
            grown = np.empty((2 * self._units.shape[0], u.size))
            grown[: self._units.shape[0]] = self._units
            self._units = grown
        self._units[i] = u

    def distances(self, v_unit: np.ndarray) -> np.ndarray:
        if not self.sums:
            return np.empty(0)
        d = self._units[: len(self.sums)] - v_unit
        return 0.5 * np.einsum("ij,ij->i", d, d)


def cosine_distance(u_unit: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v) computed as half the squared distance of unit vectors."""
    vu = v / np.linalg.norm(v)
    d = u_unit - vu
    return 0.5 * float(d @ d)


def bucket_insert(buckets: BucketSet, v, tau: float) -> BucketSet:
    """Add ``v`` to the first bucket whose sum has cosine >= 1 - tau, else open one.

    Mutates and returns ``buckets``.
    """
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if not nv > 0:
        raise PreconditionError("cannot bucket a zero query vector")
    if not 0.0 <= tau <= 1.0:
        raise PreconditionError(f"tau must lie in [0, 1], got {tau}")
    if buckets._units is not None and buckets._units.shape[1] != v.size:
        raise DimensionError(f"query of length {v.size} vs buckets of length {buckets._units.shape[1]}")
    hits = np.flatnonzero(buckets.distances(v / nv) <= tau + COLINEAR_SLACK)
    if hits.size:
        i = int(hits[0])
        buckets.members[i].append(v)
        s = buckets.sums[i] + v
        buckets.sums[i] = s
        buckets._set_unit(i, s / np.linalg.norm(s))
        return buckets
    buckets.members.append([v])
    buckets.sums.append(v.copy())
    buckets._set_unit(len(buckets.sums) - 1, v / nv)
    return buckets


def waterfill_strategy(profiles, strategies: Mapping[int, Strategy], tau: float) -> Strategy:
    """Joint strategy: one row per bucket, the bucket's summed weighted rows."""
    buckets = BucketSet()
    for p in sorted(profiles, key=lambda p: p.id):
        a = strategies[p.id]
        if not a.columns_normalized():
            raise PreconditionError(f"strategy for analyst {p.id} has non-unit column norms")
        rows = p.weight * a.matrix / a.sensitivity
        for v in rows:
            if np.any(v):
                bucket_insert(buckets, v, tau)
    return Strategy(buckets.matrix(), "Waterfilling")


def plan_waterfilling(profiles, eps: float, selector=None, tau: float = 0.0,
                      strategies=None) -> MechanismPlan:
    _check_n(profiles)
    strategies = _strategies_for(profiles, selector, strategies)
    joint = waterfill_strategy(profiles, strategies, tau)
    return _single("Waterfilling", profiles, joint, eps, selected=dict(strategies), tau=tau)


def build_plan(kind: str, profiles, eps: float, selector=None, tau: float = 1e-3,
               strategies=None) -> MechanismPlan:
    """Dispatch on mechanism name. ``strategies`` fixes per-analyst selections."""
    if kind == "Independent":
        return plan_independent(profiles, eps, selector, strategies)
    if kind == "Identity":
        return plan_identity(profiles, eps)
    if kind == "Utilitarian":
        return plan_utilitarian(profiles, eps, selector)
    if kind == "WeightedUtilitarian":
        return plan_weighted_utilitarian(profiles, eps, selector, strategies)
    if kind == "Waterfilling":
        return plan_waterfilling(profiles, eps, selector, tau, strategies)
    raise PreconditionError(f"unknown mechanism {kind!r}; expected one of {KINDS}")


# ---------------------------------------------------------------------------
# execution and analytical error
# ---------------------------------------------------------------------------

def execute_plan(plan: MechanismPlan, x, rng: np.random.Generator, noiseless: bool = False) -> Release:
    x = np.asarray(x, dtype=float)
    meas = [privacy.measure(sp.strategy, x, sp.budget, rng, noiseless=noiseless)
            for sp in plan.sub_plans]
    xbar = [privacy.reconstruct(m) for m in meas]
    answers = {aid: w.matrix @ xbar[idx] for aid, (idx, w) in sorted(plan.reconstruction.items())}
    return Release(answers, meas)


def plan_expected_errors(plan: MechanismPlan) -> Dict[int, float]:
    out = {}
    for aid, (idx, w) in sorted(plan.reconstruction.items()):
        sp = plan.sub_plans[idx]
        out[aid] = privacy.expected_error(w, sp.strategy, sp.budget)
    return out


# ---------------------------------------------------------------------------
# JSON serialization (matrices go to sidecar CSV files)
# ---------------------------------------------------------------------------

def save_plan(plan: MechanismPlan, path) -> Path:
    """Write ``plan`` as JSON plus one CSV per matrix in the same directory."""
    path = Path(path)
    stem = path.stem
    path.parent.mkdir(parents=True, exist_ok=True)

    def dump(mat, name):
        fname = f"{stem}.{name}.csv"
        matcore.write_matrix_csv(mat, path.parent / fname)
        return fname

    doc = {
        "kind": plan.kind,
        "epsilon": plan.epsilon,
        "tau": plan.tau,
        "weights": {str(k): v for k, v in sorted(plan.weights.items())},
        "sub_plans": [
            {"strategy": dump(sp.strategy.matrix, f"sub{i}"), "epsilon": sp.budget.epsilon,
             "serves": list(sp.serves)}
            for i, sp in enumerate(plan.sub_plans)
        ],
        "reconstruction": {
            str(aid): {"sub_plan": idx, "workload": dump(w.matrix, f"w{aid}"), "label": w.label}
            for aid, (idx, w) in sorted(plan.reconstruction.items())
        },
        "selected": {str(aid): dump(s.matrix, f"sel{aid}") for aid, s in sorted(plan.selected.items())},
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_plan(path) -> MechanismPlan:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent

    def load(fname):
        return matcore.read_matrix_csv(base / fname)

    subs = [SubPlan(Strategy(load(s["strategy"])), PrivacyBudget(s["epsilon"]), tuple(s["serves"]))
            for s in doc["sub_plans"]]
    recon = {int(k): (v["sub_plan"], Workload(load(v["workload"]), v.get("label", "")))
             for k, v in doc["reconstruction"].items()}
    selected = {int(k): Strategy(load(v)) for k, v in doc.get("selected", {}).items()}
    weights = {int(k): float(v) for k, v in doc.get("weights", {}).items()}
    return MechanismPlan(doc["kind"], subs, recon, doc["epsilon"], weights, selected, doc.get("tau"))


def profiles_from_plan(plan: MechanismPlan) -> List[AnalystProfile]:
    return [AnalystProfile(aid, w, plan.weights.get(aid, 1.0 / len(plan.reconstruction)))
            for aid, (_, w) in sorted(plan.reconstruction.items())]
