"""Total error, max ratio error, empirical interference and desiderata summaries."""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import numpy as np

from .mechanisms import (COLLECT_FIRST, SELECT_FIRST, AnalystProfile, build_plan,
                         plan_expected_errors, plan_independent, select_strategies)
from .errors import PreconditionError

ADAPTIVE = {
    "Independent": True,
    "Identity": False,
    "Utilitarian": True,
    "WeightedUtilitarian": True,
    "Waterfilling": True,
}

VIOLATION_TOL = 1e-9

# A workload-agnostic mechanism's independent form runs the same fixed strategy
# on each analyst's share, so its Sharing Incentive verdict uses that baseline.
OWN_BASELINE = {
    "Identity": lambda profiles: {p.id: np.eye(p.workload.n) for p in profiles},
}


@dataclass
class MetricRecord:
    instance_id: int
    mechanism: str
    errors: Dict[int, float]
    ratio_errors: Dict[int, float] = field(default_factory=dict)
    interference: Dict[int, float] = field(default_factory=dict)
    n: int = 0
    tau: float = None
    epsilon: float = 1.0
    status: str = "ok"
    # ratios against the mechanism's own independent form; drives the SI verdict
    si_ratio_errors: Dict[int, float] = None

    @property
    def k(self) -> int:
        return len(self.errors)

    @property
    def total_error(self) -> float:
        return total_error(self.errors)

    @property
    def max_ratio_error(self) -> float:
        vals = list(self.ratio_errors.values())
        return max(vals) if vals else float("nan")

    @property
    def si_ratio_error(self) -> float:
        src = self.ratio_errors if self.si_ratio_errors is None else self.si_ratio_errors
        vals = list(src.values())
        return max(vals) if vals else float("nan")

    @property
    def empirical_interference(self) -> float:
        vals = [v for v in self.interference.values() if np.isfinite(v)]
        return max(vals) if vals else float("nan")


def total_error(errors: Mapping[int, float]) -> float:
    if not errors:
        raise PreconditionError("total error of an empty cohort")
    return float(sum(errors.values()))


def _fixed(mech, profiles, selector, strategies):
    if strategies is None and selector is not None:
        strategies = select_strategies(profiles, selector)
    return strategies


def ratio_errors(mech: str, profiles, eps: float, selector=None, tau: float = 1e-3,
                 strategies=None) -> Dict[int, float]:
    """Per-analyst joint error over Independent error with the same selections."""
    strategies = _fixed(mech, profiles, selector, strategies)
    joint = plan_expected_errors(build_plan(mech, profiles, eps, selector, tau, strategies))
    base = plan_expected_errors(plan_independent(profiles, eps, strategies=strategies))
    return {aid: joint[aid] / base[aid] for aid in joint}


def max_ratio_error(mech: str, profiles, eps: float, selector=None, tau: float = 1e-3,
                    strategies=None) -> float:
    return max(ratio_errors(mech, profiles, eps, selector, tau, strategies).values())


def interference_matrix(mech: str, profiles, eps: float, selector=None, tau: float = 1e-3,
                        strategies=None, full_errors: Mapping[int, float] = None) -> Dict[tuple, float]:
    """I_i(j) for every ordered pair i != j.

    Select-first mechanisms keep each analyst's selected strategy fixed between
    the full and reduced cohorts; collect-first mechanisms reselect.
    """
    if len(profiles) < 2:
        raise PreconditionError("interference needs at least two analysts")
    fixed = mech in SELECT_FIRST or mech == "WeightedUtilitarian"
    if fixed:
        strategies = _fixed(mech, profiles, selector, strategies)
    if full_errors is None:
        full_errors = plan_expected_errors(build_plan(mech, profiles, eps, selector, tau,
                                                      strategies if fixed else None))
    total_w = sum(p.weight for p in profiles)
    out = {}
    for p in sorted(profiles, key=lambda p: p.id):
        rest = [q for q in profiles if q.id != p.id]
        eps_rest = (1.0 - p.weight / total_w) * eps
        reduced = plan_expected_errors(build_plan(mech, rest, eps_rest, selector, tau,
                                                  strategies if fixed else None))
        for q in rest:
            out[(p.id, q.id)] = full_errors[q.id] / reduced[q.id]
    return out


def empirical_interference(mech: str, profiles, eps: float, selector=None, tau: float = 1e-3,
                           strategies=None) -> float:
    return max(interference_matrix(mech, profiles, eps, selector, tau, strategies).values())


def evaluate_cohort(mech: str, profiles: Sequence[AnalystProfile], eps: float, selector=None,
                    tau: float = 1e-3, strategies=None, instance_id: int = 0,
                    with_interference: bool = True) -> MetricRecord:
    """All linear metrics for one mechanism on one cohort, from analytical errors."""
    strategies = _fixed(mech, profiles, selector, strategies)
    plan = build_plan(mech, profiles, eps, selector, tau, strategies)
    errs = plan_expected_errors(plan)
    base = plan_expected_errors(plan_independent(profiles, eps, strategies=strategies))
    ratios = {aid: errs[aid] / base[aid] for aid in errs}
    si = None
    if mech in OWN_BASELINE:
        own = OWN_BASELINE[mech](profiles)
        own_base = plan_expected_errors(plan_independent(profiles, eps, strategies=own))
        si = {aid: errs[aid] / own_base[aid] for aid in errs}
    inter = {}
    if with_interference and len(profiles) >= 2:
        pairs = interference_matrix(mech, profiles, eps, selector, tau, strategies, errs)
        for (i, j), v in pairs.items():
            inter[j] = max(inter.get(j, -np.inf), v)
    return MetricRecord(instance_id, mech, errs, ratios, inter, n=profiles[0].workload.n,
                        tau=tau if mech == "Waterfilling" else None, epsilon=eps,
                        si_ratio_errors=si)


def desiderata_report(records: Sequence[MetricRecord], tol: float = VIOLATION_TOL) -> Dict[str, dict]:
    """Per mechanism: share of instances violating each desideratum, plus adaptivity."""
    out = {}
    by_mech: Dict[str, List[MetricRecord]] = {}
    for r in records:
        if r.status == "ok":
            by_mech.setdefault(r.mechanism, []).append(r)
    for mech, rs in by_mech.items():
        si = [r.si_ratio_error > 1.0 + tol for r in rs]
        ni = [r.empirical_interference > 1.0 + tol for r in rs if np.isfinite(r.empirical_interference)]
        out[mech] = {
            "instances": len(rs),
            "sharing_incentive_violation_rate": float(np.mean(si)) if si else 0.0,
            "non_interference_violation_rate": float(np.mean(ni)) if ni else 0.0,
            "adaptive": ADAPTIVE.get(mech, True),
            "mean_total_error": float(np.mean([r.total_error for r in rs])),
        }
    return out
