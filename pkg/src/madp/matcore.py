"""Dense matrix primitives shared by every mechanism.

Matrices are plain 2-d float64 numpy arrays and vectors are 1-d arrays.
All functions are pure; inputs are never modified.
"""
import csv
from pathlib import Path

import numpy as np

from .errors import DimensionError, NumericalError, ResourceError

RCOND = 1e-12
MAX_ENTRIES = 2**20


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a finite 2-d float array (a 1-d input becomes one row)."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalError(f"matrix of shape {m.shape} has non-finite entries")
    return m


def check_size(rows: int, cols: int, max_entries: int = None):
    cap = MAX_ENTRIES if max_entries is None else max_entries
    if rows * cols > cap:
        raise ResourceError(f"{rows}x{cols} matrix exceeds the cap of {cap} entries")


def pseudo_inverse(a, rcond: float = RCOND) -> np.ndarray:
    """Moore-Penrose inverse via SVD.

    Singular values below ``rcond * sigma_max`` are treated as zero, which keeps
    rank-deficient strategies (e.g. a lone Total row) well behaved.
    """
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed for {a.shape[0]}x{a.shape[1]} matrix: {exc}") from exc
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]))
    keep = s > rcond * s[0]
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (vt.T * inv_s) @ u.T


def l1_column_norms(a) -> np.ndarray:
    return np.abs(as_matrix(a)).sum(axis=0)


def l1_norm(a) -> float:
    """Sensitivity of a query matrix: its largest L1 column norm."""
    return float(l1_column_norms(a).max())


def frobenius_sq(a) -> float:
    m = np.asarray(a, dtype=float)
    return float(np.sum(m * m))


def kronecker(a, b, max_entries: int = None) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    check_size(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1], max_entries)
    return np.kron(a, b)


def zero_columns(a) -> np.ndarray:
    """Boolean mask of all-zero columns."""
    return l1_column_norms(a) == 0.0


def normalize_columns(a, return_zero_mask: bool = False):
    """Scale every nonzero column to unit L1 norm; zero columns are left alone."""
    a = as_matrix(a)
    norms = l1_column_norms(a)
    zero = norms == 0.0
    scale = np.where(zero, 1.0, norms)
    out = a / scale
    if return_zero_mask:
        return out, zero
    return out


def spans_rowspace(w, a, tol: float = 1e-9, a_pinv: np.ndarray = None) -> bool:
    """True iff every row of ``w`` lies (numerically) in the row space of ``a``."""
    w, a = as_matrix(w), as_matrix(a)
    if w.shape[1] != a.shape[1]:
        raise DimensionError(f"column mismatch: workload has {w.shape[1]}, strategy has {a.shape[1]}")
    ap = pseudo_inverse(a) if a_pinv is None else a_pinv
    resid = w - (w @ ap) @ a
    return np.sqrt(frobenius_sq(resid)) <= tol * max(1.0, np.sqrt(frobenius_sq(w)))


def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless dense CSV, one matrix row per line."""
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec:
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError as exc:
                raise DimensionError(f"{path}:{lineno}: non-numeric entry ({exc})") from exc
    if not rows:
        raise DimensionError(f"{path}: empty matrix file")
    if len({len(r) for r in rows}) != 1:
        raise DimensionError(f"{path}: ragged rows")
    return as_matrix(rows)


def write_matrix_csv(a, path):
    a = as_matrix(a)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for row in a:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
