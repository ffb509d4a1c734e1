"""Workload catalog and randomized workload generators."""
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from . import matcore
from .errors import DimensionError, PreconditionError


@dataclass(frozen=True, eq=False)
class Workload:
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "matrix", matcore.as_matrix(self.matrix))

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def __eq__(self, other):
        return (isinstance(other, Workload) and self.label == other.label
                and self.shape == other.shape and np.array_equal(self.matrix, other.matrix))

    __hash__ = None


@dataclass(frozen=True)
class MarginalSpec:
    """An m-way marginal over ``len(domain_sizes)`` attributes.

    ``subset`` holds 0-based attribute indices that keep their full histogram;
    every other attribute is summed out.
    """
    domain_sizes: tuple
    subset: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "domain_sizes", tuple(int(s) for s in self.domain_sizes))
        object.__setattr__(self, "subset", frozenset(int(i) for i in self.subset))
        d = len(self.domain_sizes)
        if d < 1 or any(s < 1 for s in self.domain_sizes):
            raise PreconditionError(f"bad domain sizes {self.domain_sizes}")
        bad = [i for i in self.subset if not 0 <= i < d]
        if bad:
            raise PreconditionError(f"attribute indices {sorted(bad)} outside [0, {d})")

    @property
    def d(self) -> int:
        return len(self.domain_sizes)


def identity(n: int) -> np.ndarray:
    return np.eye(n)


def total(n: int) -> np.ndarray:
    return np.ones((1, n))


def singleton(n: int, i: int) -> np.ndarray:
    if not 0 <= i < n:
        raise PreconditionError(f"singleton index {i} outside [0, {n})")
    row = np.zeros((1, n))
    row[0, i] = 1.0
    return row


def prefix(n: int) -> np.ndarray:
    return np.tril(np.ones((n, n)))


def h2(n: int) -> np.ndarray:
    """Hierarchical workload: stack of I_{n/t} (x) T_t for t = n, n/2, ..., 1."""
    if n < 1 or n & (n - 1):
        raise PreconditionError(f"H2 needs a power-of-two domain, got n={n}")
    blocks = []
    t = n
    while t >= 1:
        blocks.append(np.kron(np.eye(n // t), np.ones((1, t))))
        t //= 2
    return np.vstack(blocks)


def builtin_workload(kind: str, n: int, index: int = None) -> Workload:
    """Build one of Identity, Total, Singleton(index), Prefix or H2 on ``n`` cells."""
    if n < 1:
        raise PreconditionError(f"domain size must be >= 1, got {n}")
    key = kind.lower()
    if key == "identity":
        return Workload(identity(n), "Identity")
    if key == "total":
        return Workload(total(n), "Total")
    if key == "singleton":
        i = 0 if index is None else index
        return Workload(singleton(n, i), f"Singleton({i})")
    if key == "prefix":
        return Workload(prefix(n), "Prefix")
    if key == "h2":
        return h2_workload(n)
    raise PreconditionError(f"unknown workload kind {kind!r}")


def h2_workload(n: int) -> Workload:
    return Workload(h2(n), "H2")


def marginal_workload(spec: MarginalSpec, max_entries: int = None) -> Workload:
    rows = int(np.prod([spec.domain_sizes[i] for i in spec.subset])) if spec.subset else 1
    cols = int(np.prod(spec.domain_sizes))
    matcore.check_size(rows, cols, max_entries)
    out = np.ones((1, 1))
    for i, size in enumerate(spec.domain_sizes):
        out = np.kron(out, identity(size) if i in spec.subset else total(size))
    label = "Marginal(" + ",".join(str(i) for i in sorted(spec.subset)) + ")"
    return Workload(out, label)


def all_m_way_marginals(d: int, m: int, domain_sizes: Sequence[int] = None,
                        max_entries: int = None) -> list:
    """Every m-way marginal, subsets in lexicographic order."""
    if not 0 <= m <= d:
        raise PreconditionError(f"need 0 <= m <= d, got m={m}, d={d}")
    sizes = tuple(domain_sizes) if domain_sizes is not None else (2,) * d
    if len(sizes) != d:
        raise PreconditionError(f"{len(sizes)} domain sizes given for d={d}")
    return [marginal_workload(MarginalSpec(sizes, frozenset(s)), max_entries)
            for s in combinations(range(d), m)]


QUERY_CLASSES = ("range", "singleton", "sum", "random")


def random_range_row(n: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = sorted(rng.integers(0, n, size=2))
    row = np.zeros(n)
    row[lo:hi + 1] = 1.0
    return row


def random_query_row(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "range":
        return random_range_row(n, rng)
    if kind == "singleton":
        row = np.zeros(n)
        row[rng.integers(0, n)] = 1.0
        return row
    if kind == "sum":
        while True:
            row = (rng.random(n) < 0.5).astype(float)
            if row.any():
                return row
    if kind == "random":
        return rng.random(n)
    raise PreconditionError(f"unknown query class {kind!r}")


def random_custom_workload(n: int, rng: np.random.Generator) -> Workload:
    """Stack of 1..2n random queries, each from a uniformly chosen query class."""
    if n < 1:
        raise PreconditionError(f"domain size must be >= 1, got {n}")
    m = int(rng.integers(1, 2 * n + 1))
    rows = []
    for _ in range(m):
        kind = QUERY_CLASSES[int(rng.integers(0, len(QUERY_CLASSES)))]
        rows.append(random_query_row(kind, n, rng))
    return Workload(np.vstack(rows), "Custom")


def random_range_workload(n: int, rng: np.random.Generator, label: str = "Range") -> Workload:
    """A random set of 1..2n contiguous range queries."""
    m = int(rng.integers(1, 2 * n + 1))
    return Workload(np.vstack([random_range_row(n, rng) for _ in range(m)]), label)


def stack_workloads(ws: Sequence[Workload], scales: Sequence[float] = None) -> Workload:
    """Vertical stack of ``scale_i * W_i``; duplicate rows are kept."""
    if not ws:
        raise PreconditionError("nothing to stack")
    scales = [1.0] * len(ws) if scales is None else list(scales)
    if len(scales) != len(ws):
        raise DimensionError(f"{len(ws)} workloads but {len(scales)} scales")
    if any(not s > 0 for s in scales):
        raise PreconditionError("stack scales must be positive")
    n = ws[0].n
    if any(w.n != n for w in ws):
        raise DimensionError("stacked workloads must share the column count")
    mat = np.vstack([s * w.matrix for w, s in zip(ws, scales)])
    return Workload(mat, "+".join(w.label for w in ws))


def save_workload(w: Workload, path):
    """Write the matrix as CSV and the label to a ``<path>.label`` sidecar."""
    path = Path(path)
    matcore.write_matrix_csv(w.matrix, path)
    path.with_name(path.name + ".label").write_text(w.label + "\n", encoding="utf-8")


def load_workload(path) -> Workload:
    path = Path(path)
    side = path.with_name(path.name + ".label")
    label = side.read_text(encoding="utf-8").strip() if side.exists() else path.stem
    return Workload(matcore.read_matrix_csv(path), label)
