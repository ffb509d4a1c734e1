"""Mean and quantile estimates decoded from noisy linear answers."""
from dataclasses import dataclass

import numpy as np

from . import privacy
from .errors import PreconditionError
from .mechanisms import MechanismPlan
from .workloads import Workload, prefix


@dataclass(frozen=True, eq=False)
class Histogram:
    values: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        c = np.asarray(self.counts, dtype=float)
        if v.ndim != 1 or v.shape != c.shape or v.size == 0:
            raise PreconditionError("values and counts must be equal-length non-empty vectors")
        if np.any(c < 0):
            raise PreconditionError("histogram counts must be nonnegative")
        if np.any(np.diff(v) <= 0):
            raise PreconditionError("histogram values must be strictly ascending")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class DerivedQuery:
    """``kind`` is "mean" or "quantile"; ``q`` is used by quantiles only."""
    kind: str
    q: float = 0.5

    def __post_init__(self):
        if self.kind not in ("mean", "quantile"):
            raise PreconditionError(f"unknown derived query {self.kind!r}")
        if self.kind == "quantile" and not 0.0 < self.q < 1.0:
            raise PreconditionError(f"quantile level must lie in (0, 1), got {self.q}")

    @property
    def name(self) -> str:
        if self.kind == "mean":
            return "mean"
        return "median" if self.q == 0.5 else f"p{round(self.q * 100):g}"

    def base_workload(self, hist: Histogram) -> Workload:
        if self.kind == "mean":
            return Workload(np.vstack([np.ones(hist.n), hist.values]), "Mean")
        return Workload(prefix(hist.n), "Prefix")

    def estimate(self, answers: np.ndarray, hist: Histogram) -> float:
        if self.kind == "mean":
            return estimate_mean(answers, hist.values)
        return estimate_quantile(answers, self.q, hist.values)

    def true_value(self, hist: Histogram) -> float:
        return self.estimate(self.base_workload(hist).matrix @ hist.counts, hist)


PAPER_QUERIES = (DerivedQuery("mean"), DerivedQuery("quantile", 0.5),
                 DerivedQuery("quantile", 0.25), DerivedQuery("quantile", 0.75))


def estimate_mean(noisy, values) -> float:
    """Weighted sum over total; a non-positive total falls back to the range midpoint."""
    noisy = np.asarray(noisy, dtype=float)
    if noisy.shape != (2,):
        raise PreconditionError(f"mean needs [total, weighted_sum], got shape {noisy.shape}")
    tot, wsum = noisy
    if tot <= 0:
        return 0.5 * (float(values[0]) + float(values[-1]))
    return float(wsum / tot)


def quantile_index(noisy_prefix, q: float) -> int:
    """Smallest i with prefix[i] >= q * prefix[-1]; the last cell if none."""
    p = np.asarray(noisy_prefix, dtype=float)
    if not 0.0 < q < 1.0:
        raise PreconditionError(f"quantile level must lie in (0, 1), got {q}")
    hits = np.flatnonzero(p >= q * p[-1])
    return int(hits[0]) if hits.size else p.size - 1


def estimate_quantile(noisy_prefix, q: float, values=None):
    i = quantile_index(noisy_prefix, q)
    return i if values is None else float(values[i])


def _batch_answers(plan: MechanismPlan, analyst_id: int, x, samples, rng, noiseless):
    idx, w = plan.reconstruction[analyst_id]
    sp = plan.sub_plans[idx]
    a = sp.strategy
    scale = a.sensitivity / sp.budget.epsilon
    y = np.broadcast_to(a.matrix @ x, (samples, a.shape[0]))
    if not noiseless:
        y = y + privacy.laplace_noise(scale, (samples, a.shape[0]), rng)
    xbar = y @ a.pinv.T
    return xbar @ w.matrix.T


def empirical_mse(plan: MechanismPlan, hist: Histogram, query: DerivedQuery, samples: int = 10000,
                  rng: np.random.Generator = None, analyst_id: int = None, noiseless: bool = False) -> float:
    """Mean squared error of the derived estimate over ``samples`` noisy releases."""
    if samples < 1:
        raise PreconditionError("need at least one sample")
    if analyst_id is None:
        analyst_id = plan.analyst_ids[0]
    if analyst_id not in plan.reconstruction:
        raise PreconditionError(f"plan does not serve analyst {analyst_id}")
    if rng is None and not noiseless:
        raise PreconditionError("a generator is required unless noiseless")
    truth = query.true_value(hist)
    ans = _batch_answers(plan, analyst_id, hist.counts, samples, rng, noiseless)
    if query.kind == "mean":
        tot, wsum = ans[:, 0], ans[:, 1]
        mid = 0.5 * (hist.values[0] + hist.values[-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            est = np.where(tot > 0, wsum / np.where(tot > 0, tot, 1.0), mid)
    else:
        thresh = query.q * ans[:, -1:]
        hit = ans >= thresh
        first = np.where(hit.any(axis=1), hit.argmax(axis=1), hist.n - 1)
        est = hist.values[first]
    sq = (est - truth) ** 2
    return float(np.sum(sq) / samples)


def synthetic_age_histogram(rng: np.random.Generator = None, total: int = 2000) -> Histogram:
    """Stand-in for an 86-cell age distribution (ages 0..85, last cell open-ended).

    A smooth declining pyramid with a bump around working ages, sampled as a
    multinomial so counts are integers.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    ages = np.arange(86, dtype=float)
    shape = 1.2 - ages / 110.0 + 0.35 * np.exp(-((ages - 35.0) / 14.0) ** 2)
    shape[-1] *= 3.0  # the top cell pools 85+
    counts = rng.multinomial(total, shape / shape.sum()).astype(float)
    return Histogram(ages, counts)


def write_histogram_csv(hist: Histogram, path):
    lines = ["value,count"] + [f"{v:.12g},{c:.12g}" for v, c in zip(hist.values, hist.counts)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
