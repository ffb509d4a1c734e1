"""Scenario generators, the experiment runner and CSV/JSON I/O."""
import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import mechanisms as mech
from . import workloads as wl
from .errors import ConfigError, MadpError, ParseError
from .mechanisms import AnalystProfile, select_strategies
from .metrics import MetricRecord, evaluate_cohort
from .nonlinear import PAPER_QUERIES, DerivedQuery, Histogram, empirical_mse
from .selection import make_selector

SCENARIOS = ("practical", "marginal", "pathological", "tolerance", "nonlinear")
CSV_HEADER = ("instance_id", "mechanism", "k", "n", "analyst_id", "expected_error",
              "ratio_error", "interference", "tau", "epsilon", "status")
PRACTICAL_SLOTS = ("Range0", "Range1", "Range2", "Identity", "Total", "Prefix", "H2", "Custom")
DEFAULT_TAUS = (0.1, 0.01, 1e-3, 1e-4, 0.0)


@dataclass
class ExperimentConfig:
    scenario: str = "practical"
    # None picks the scenario's domain: 64 practical, 16 pathological
    n: Optional[int] = None
    k_max: int = 20
    trials: int = 100
    epsilon: float = 1.0
    tau: float = 1e-3
    seed: int = 0
    selector: str = "catalog"
    mechanisms: List[str] = field(default_factory=lambda: list(mech.KINDS))
    output: str = "results.csv"
    # p-identity selector
    restarts: int = 10
    iters: int = 200
    p: Optional[int] = None
    inject_catalog: bool = True
    # marginal / tolerance
    d: int = 8
    m: int = 1
    taus: List[float] = field(default_factory=lambda: list(DEFAULT_TAUS))
    # pathological
    uncommon: str = "Identity"
    common: str = "Total"
    k_min: int = 2
    k_stop: int = 10
    # nonlinear
    histogram: Optional[str] = None
    samples: int = 10000
    interference: bool = True

    @property
    def domain(self) -> int:
        if self.n is not None:
            return int(self.n)
        return 16 if self.scenario == "pathological" else 64

    def validate(self):
        if self.n is not None and self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not 0 <= self.tau <= 1 or any(not 0 <= t <= 1 for t in self.taus):
            raise ConfigError("tau values must lie in [0, 1]")
        if self.k_max < 2:
            raise ConfigError("k_max must be >= 2")
        bad = [m for m in self.mechanisms if m not in mech.KINDS]
        if bad:
            raise ConfigError(f"unknown mechanisms {bad}; expected a subset of {mech.KINDS}")
        if self.selector not in ("catalog", "identity", "p_identity"):
            raise ConfigError(f"unknown selector {self.selector!r}")
        if self.scenario == "nonlinear" and not self.histogram:
            raise ConfigError("nonlinear scenario needs a histogram path")
        return self

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**doc).validate()

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def selector_fn(self):
        return make_selector(self.selector, p=self.p, restarts=self.restarts, iters=self.iters,
                             seed=self.seed, inject_catalog=self.inject_catalog)


@dataclass(eq=False)
class Instance:
    instance_id: int
    profiles: List[AnalystProfile]
    queries: Optional[List[DerivedQuery]] = None

    @property
    def k(self) -> int:
        return len(self.profiles)

    @property
    def n(self) -> int:
        return self.profiles[0].workload.n


def instance_rng(seed: int, instance_id: int, purpose: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(instance_id), int(purpose)])


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def practical_catalog(n: int, rng: np.random.Generator) -> dict:
    """Fixed workloads for the 8 practical slots; Custom is drawn per analyst."""
    if n & (n - 1):
        raise ConfigError(f"practical scenario needs a power-of-two n for H2, got {n}")
    cat = {f"Range{i}": wl.random_range_workload(n, rng, f"Range{i}") for i in range(3)}
    cat["Identity"] = wl.builtin_workload("identity", n)
    cat["Total"] = wl.builtin_workload("total", n)
    cat["Prefix"] = wl.builtin_workload("prefix", n)
    cat["H2"] = wl.h2_workload(n)
    return cat


def gen_practical(cfg: ExperimentConfig, rng: np.random.Generator = None) -> List[Instance]:
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n = cfg.domain
    cat = practical_catalog(n, rng)
    out = []
    for t in range(cfg.trials):
        k = int(rng.integers(2, cfg.k_max + 1))
        ws = []
        for _ in range(k):
            slot = PRACTICAL_SLOTS[int(rng.integers(0, len(PRACTICAL_SLOTS)))]
            ws.append(wl.random_custom_workload(n, rng) if slot == "Custom" else cat[slot])
        out.append(Instance(t, mech.equal_weight_profiles(ws)))
    return out


def gen_marginal(cfg: ExperimentConfig, rng: np.random.Generator = None) -> List[Instance]:
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    cands = wl.all_m_way_marginals(cfg.d, cfg.m)
    out = []
    for t in range(cfg.trials):
        k = int(rng.integers(2, cfg.k_max + 1))
        ws = [cands[int(rng.integers(0, len(cands)))] for _ in range(k)]
        out.append(Instance(t, mech.equal_weight_profiles(ws)))
    return out


def _patho_workload(kind: str, n: int) -> wl.Workload:
    key = kind.lower()
    if key not in ("singleton", "identity", "total"):
        raise ConfigError(f"pathological workloads are Singleton, Identity or Total, got {kind!r}")
    return wl.builtin_workload(key, n)


def gen_pathological(cfg: ExperimentConfig) -> List[Instance]:
    """One uncommon plus k-1 common workloads for each k; no randomness."""
    n = cfg.domain
    out = []
    for t, k in enumerate(range(cfg.k_min, cfg.k_stop + 1)):
        ws = [_patho_workload(cfg.uncommon, n)] + [_patho_workload(cfg.common, n)] * (k - 1)
        out.append(Instance(t, mech.equal_weight_profiles(ws)))
    return out


def gen_nonlinear(cfg: ExperimentConfig, hist: Histogram, rng: np.random.Generator = None) -> List[Instance]:
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    out = []
    for t in range(cfg.trials):
        k = int(rng.integers(2, cfg.k_max + 1))
        qs = [PAPER_QUERIES[int(rng.integers(0, len(PAPER_QUERIES)))] for _ in range(k)]
        ws = [q.base_workload(hist) for q in qs]
        out.append(Instance(t, mech.equal_weight_profiles(ws), qs))
    return out


def generate(cfg: ExperimentConfig, hist: Histogram = None) -> List[Instance]:
    if cfg.scenario == "practical":
        return gen_practical(cfg)
    if cfg.scenario in ("marginal", "tolerance"):
        return gen_marginal(cfg)
    if cfg.scenario == "pathological":
        return gen_pathological(cfg)
    if hist is None:
        hist = load_histogram_csv(cfg.histogram)
    return gen_nonlinear(cfg, hist)


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def _failed(inst: Instance, mechanism: str, cfg, reason: str, tau=None) -> MetricRecord:
    nan = float("nan")
    ids = [p.id for p in inst.profiles]
    return MetricRecord(inst.instance_id, mechanism, {i: nan for i in ids}, {i: nan for i in ids},
                        {i: nan for i in ids}, n=inst.n, tau=tau, epsilon=cfg.epsilon,
                        status=f"failed: {reason}")


def _selected(cfg, inst, selector):
    # each analyst gets their own selection stream so repeated workloads can differ
    return select_strategies(inst.profiles, selector, instance_rng(cfg.seed, inst.instance_id, 1))


def run_instance(cfg: ExperimentConfig, inst: Instance, plan_dir: Path = None) -> List[MetricRecord]:
    selector = cfg.selector_fn()
    try:
        strategies = _selected(cfg, inst, selector)
    except MadpError as exc:
        return [_failed(inst, m, cfg, f"selection: {exc}") for m in cfg.mechanisms]
    jobs = []
    for m in cfg.mechanisms:
        if cfg.scenario == "tolerance" and m == "Waterfilling":
            jobs.extend((m, t) for t in cfg.taus)
        else:
            jobs.append((m, cfg.tau if m == "Waterfilling" else None))
    out = []
    for m, tau in jobs:
        try:
            rec = evaluate_cohort(m, inst.profiles, cfg.epsilon, selector,
                                  tau if tau is not None else cfg.tau, strategies,
                                  instance_id=inst.instance_id, with_interference=cfg.interference)
            rec.tau = tau
            if plan_dir is not None:
                plan = mech.build_plan(m, inst.profiles, cfg.epsilon, selector,
                                       tau if tau is not None else cfg.tau, strategies)
                suffix = "" if tau is None else f"_tau{tau:g}"
                mech.save_plan(plan, plan_dir / f"i{inst.instance_id}_{m}{suffix}.json")
        except MadpError as exc:
            rec = _failed(inst, m, cfg, str(exc), tau)
        out.append(rec)
    return out


def _ratio(a: float, b: float) -> float:
    # sampled MSE can be exactly zero for quantiles on large histograms
    if b > 0:
        return a / b
    return 1.0 if a == 0 else math.inf


def run_nonlinear_instance(cfg: ExperimentConfig, inst: Instance, hist: Histogram) -> List[MetricRecord]:
    """Empirical MSE per analyst; ratios and interference are empirical too."""
    selector = cfg.selector_fn()
    try:
        strategies = _selected(cfg, inst, selector)
    except MadpError as exc:
        return [_failed(inst, m, cfg, f"selection: {exc}") for m in cfg.mechanisms]
    qmap = {p.id: q for p, q in zip(inst.profiles, inst.queries)}

    def mses(kind, profiles, eps, stream):
        plan = mech.build_plan(kind, profiles, eps, selector, cfg.tau, strategies)
        return {p.id: empirical_mse(plan, hist, qmap[p.id], cfg.samples,
                                    instance_rng(cfg.seed, inst.instance_id, 1000 + 97 * stream + p.id),
                                    analyst_id=p.id)
                for p in profiles}

    out = []
    try:
        base = mses("Independent", inst.profiles, cfg.epsilon, 0)
    except MadpError as exc:
        return [_failed(inst, m, cfg, f"baseline: {exc}") for m in cfg.mechanisms]
    for mi, m in enumerate(cfg.mechanisms, start=1):
        try:
            errs = base if m == "Independent" else mses(m, inst.profiles, cfg.epsilon, 10 * mi)
            ratios = {a: _ratio(errs[a], base[a]) for a in errs}
            inter = {}
            if cfg.interference:
                total_w = sum(p.weight for p in inst.profiles)
                for p in inst.profiles:
                    rest = [q for q in inst.profiles if q.id != p.id]
                    red = mses(m, rest, (1.0 - p.weight / total_w) * cfg.epsilon, 10 * mi + 2 + p.id * 10007)
                    for q in rest:
                        v = _ratio(errs[q.id], red[q.id])
                        inter[q.id] = max(inter.get(q.id, -math.inf), v)
            rec = MetricRecord(inst.instance_id, m, errs, ratios, inter, n=inst.n,
                               tau=cfg.tau if m == "Waterfilling" else None, epsilon=cfg.epsilon)
        except MadpError as exc:
            rec = _failed(inst, m, cfg, str(exc))
        out.append(rec)
    return out


def run_experiment(cfg: ExperimentConfig, instances: Sequence[Instance] = None,
                   plan_dir=None) -> List[MetricRecord]:
    """Evaluate every requested mechanism on every instance, in instance order."""
    cfg.validate()
    hist = load_histogram_csv(cfg.histogram) if cfg.scenario == "nonlinear" else None
    if instances is None:
        instances = generate(cfg, hist)
    plan_dir = Path(plan_dir) if plan_dir is not None else None
    records = []
    for inst in instances:
        if cfg.scenario == "nonlinear":
            records.extend(run_nonlinear_instance(cfg, inst, hist))
        else:
            records.extend(run_instance(cfg, inst, plan_dir))
    return records


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.12g}"


def csv_rows(records: Sequence[MetricRecord]):
    for r in records:
        for aid in sorted(r.errors):
            yield (r.instance_id, r.mechanism, r.k, r.n, aid, _fmt(r.errors[aid]),
                   _fmt(r.ratio_errors.get(aid)), _fmt(r.interference.get(aid)),
                   _fmt(r.tau), _fmt(r.epsilon), r.status)


def write_csv(records: Sequence[MetricRecord], path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            w.writerows(csv_rows(records))
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def load_histogram_csv(path) -> Histogram:
    """Parse ``value,count`` rows (header required, values strictly ascending)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(path, 0, f"cannot read histogram: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows or [c.strip().lower() for c in rows[0]] != ["value", "count"]:
        raise ParseError(path, 1, "expected header 'value,count'")
    values, counts = [], []
    for lineno, rec in enumerate(rows[1:], start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != 2:
            raise ParseError(path, lineno, f"expected 2 columns, got {len(rec)}")
        try:
            v, c = float(rec[0]), float(rec[1])
        except ValueError:
            raise ParseError(path, lineno, f"non-numeric row {rec}") from None
        if not (math.isfinite(v) and math.isfinite(c)):
            raise ParseError(path, lineno, "non-finite entry")
        if c < 0:
            raise ParseError(path, lineno, f"negative count {c}")
        if values and v <= values[-1]:
            raise ParseError(path, lineno, f"value {v} not above previous {values[-1]}")
        values.append(v)
        counts.append(c)
    if not values:
        raise ParseError(path, 2, "histogram has no rows")
    return Histogram(np.array(values), np.array(counts))


def instances_to_json(cfg: ExperimentConfig, instances: Sequence[Instance]) -> dict:
    return {
        "config": asdict(cfg),
        "instances": [
            {"instance_id": inst.instance_id,
             "analysts": [{"id": p.id, "weight": p.weight, "label": p.workload.label,
                           "matrix": p.workload.matrix.tolist()} for p in inst.profiles],
             "queries": None if inst.queries is None else [asdict(q) for q in inst.queries]}
            for inst in instances
        ],
    }


def instances_from_json(doc: dict) -> List[Instance]:
    out = []
    for d in doc["instances"]:
        profiles = [AnalystProfile(a["id"], wl.Workload(np.array(a["matrix"]), a.get("label", "")),
                                   float(a["weight"])) for a in d["analysts"]]
        qs = None if d.get("queries") is None else [DerivedQuery(**q) for q in d["queries"]]
        out.append(Instance(d["instance_id"], profiles, qs))
    return out


def recompute_from_plans(plan_dir, cfg: ExperimentConfig) -> List[MetricRecord]:
    """Rebuild metric records from plans written by ``run_experiment(plan_dir=...)``."""
    selector = cfg.selector_fn()
    records = []
    paths = sorted(Path(plan_dir).glob("i*_*.json"),
                   key=lambda p: (int(p.stem.split("_")[0][1:]), p.stem))
    for path in paths:
        plan = mech.load_plan(path)
        profiles = mech.profiles_from_plan(plan)
        iid = int(path.stem.split("_")[0][1:])
        strategies = plan.selected or None
        tau = plan.tau if plan.tau is not None else cfg.tau
        try:
            rec = evaluate_cohort(plan.kind, profiles, plan.epsilon, selector, tau, strategies,
                                  instance_id=iid, with_interference=cfg.interference)
            rec.tau = plan.tau
        except MadpError as exc:
            rec = MetricRecord(iid, plan.kind, {p.id: float("nan") for p in profiles},
                               n=profiles[0].workload.n, epsilon=plan.epsilon, status=f"failed: {exc}")
        records.append(rec)
    return records
