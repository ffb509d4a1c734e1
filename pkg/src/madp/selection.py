"""Strategy selection: identity, best-of-catalog and a p-identity optimizer.

Every selector returns a :class:`Strategy` whose columns all have unit L1
norm, which is what the waterfilling bucket step needs to keep the joint
sensitivity equal to the sum of analyst weights.
"""
import hashlib
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import matcore, privacy
from .errors import InfeasibleStrategyError, OptimizationFailedError, PreconditionError
from .strategy import Strategy
from .workloads import Workload, h2, prefix

Selector = Callable[[Workload], Strategy]

CATALOG = ("identity", "total", "prefix", "h2", "workload")


def complete_strategy(a, label: str = "") -> Strategy:
    """Column-normalize ``a``, drop zero rows and give zero columns a unit row.

    A cell no query touches gets its own indicator row. The added rows are
    orthogonal to everything the workload asks, so the reconstruction error is
    unchanged while every column now has L1 norm exactly 1.
    """
    a, zero = matcore.normalize_columns(a, return_zero_mask=True)
    a = a[np.abs(a).sum(axis=1) > 0]
    if zero.any():
        pad = np.eye(zero.shape[0])[zero]
        a = pad if a.shape[0] == 0 else np.vstack([a, pad])
    return Strategy(a, label)


def select_identity(w: Workload) -> Strategy:
    return Strategy(np.eye(w.n), "Identity")


def catalog_candidates(w: Workload) -> list:
    n = w.n
    out = [("identity", Strategy(np.eye(n), "Identity")),
           ("total", Strategy(np.ones((1, n)), "Total")),
           ("prefix", complete_strategy(prefix(n), "Prefix"))]
    if n & (n - 1) == 0:
        out.append(("h2", complete_strategy(h2(n), "H2")))
    out.append(("workload", complete_strategy(w.matrix, "Workload")))
    return out


def catalog_errors(w: Workload) -> dict:
    """Expected error at eps=1 for each feasible catalog candidate."""
    errs = {}
    for name, s in catalog_candidates(w):
        try:
            errs[name] = (privacy.expected_error(w, s, 1.0), s)
        except InfeasibleStrategyError:
            continue
    return errs


def _argmin_in_order(items):
    best = None
    for key, (err, s) in items:
        # near-ties go to the earlier candidate
        if best is None or err < best[0] * (1.0 - 1e-12):
            best = (err, s, key)
    return best


def select_catalog(w: Workload) -> Strategy:
    """Best of Identity, Total, Prefix, H2 and the normalized workload itself."""
    best = _argmin_in_order(catalog_errors(w).items())
    if best is None:  # identity always spans; kept for safety
        raise InfeasibleStrategyError(f"no catalog strategy spans workload {w.shape}")
    return best[1]


# ---------------------------------------------------------------------------
# p-identity optimization
# ---------------------------------------------------------------------------

@dataclass
class PIdentityParams:
    """Parameters of A(theta) = normalize_columns([diag(identity_weights); theta])."""
    theta: np.ndarray
    identity_weights: np.ndarray

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    def strategy(self) -> Strategy:
        a = np.vstack([np.diag(self.identity_weights), self.theta])
        return complete_strategy(a, "PIdentity")


def _solve_gram(theta, rhs):
    """Solve (I + theta^T theta) z = rhs, via Woodbury when p < n."""
    p, n = theta.shape
    if p == 0:
        return rhs.copy()
    if p < n:
        k = np.eye(p) + theta @ theta.T
        return rhs - theta.T @ cho_solve(cho_factor(k), theta @ rhs)
    m = np.eye(n) + theta.T @ theta
    return cho_solve(cho_factor(m), rhs)


def p_identity_loss(theta: np.ndarray, wmat: np.ndarray, grad: bool = True):
    """Loss ||W A(theta)^+||_F^2 with identity weights fixed at 1, and its gradient.

    With c the column sums of [I; theta], A^T A = C^-1 (I + theta^T theta) C^-1,
    so the loss is tr(V M^-1 V^T) with V = W C and M = I + theta^T theta.
    """
    c = 1.0 + theta.sum(axis=0)
    v = wmat * c
    z = _solve_gram(theta, v.T)          # n x m
    loss = float(np.sum(v.T * z))
    if not grad:
        return loss
    g_c = 2.0 * np.sum(wmat.T * z, axis=1)
    g = -2.0 * (theta @ z) @ z.T + g_c[None, :]
    return loss, g


def _descend(theta, wmat, iters, step=1.0):
    loss, g = p_identity_loss(theta, wmat)
    for _ in range(iters):
        accepted = False
        for _ in range(40):
            cand = np.maximum(theta - step * g, 0.0)
            closs = p_identity_loss(cand, wmat, grad=False)
            if np.isfinite(closs) and closs < loss:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        improvement = loss - closs
        theta = cand
        loss, g = p_identity_loss(theta, wmat)
        step *= 1.5
        if improvement <= 1e-12 * max(loss, 1e-300):
            break
    return theta, loss


def optimize_p_identity(w: Workload, p: int, restarts: int, iters: int,
                        rng: np.random.Generator) -> tuple:
    """Best of ``restarts`` projected-descent runs from random nonnegative starts."""
    if p < 0 or restarts < 1:
        raise PreconditionError(f"need p >= 0 and restarts >= 1, got p={p}, restarts={restarts}")
    wmat = w.matrix
    best = None
    for r in range(restarts):
        theta0 = rng.random((p, w.n))
        try:
            theta, loss = _descend(theta0, wmat, iters)
        except np.linalg.LinAlgError:
            continue
        if np.isfinite(loss) and (best is None or loss < best[1]):
            best = (theta, loss, r)
    if best is None:
        raise OptimizationFailedError(f"p-identity optimization failed on every restart for {w.shape}")
    theta = best[0]
    return PIdentityParams(theta, np.ones(w.n)), best[1]


def select_p_identity(w: Workload, p: int = None, restarts: int = 10, iters: int = 200,
                      rng: np.random.Generator = None, inject_catalog: bool = True) -> Strategy:
    """p-identity strategy optimized for ``w``.

    With ``inject_catalog`` the catalog winner competes as restart 0, so the
    result is never worse than :func:`select_catalog`. Ties go to the catalog.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    p = w.n if p is None else int(p)
    params, _ = optimize_p_identity(w, p, restarts, iters, rng)
    opt = params.strategy()
    if not inject_catalog:
        return opt
    cat = select_catalog(w)
    e_cat = privacy.expected_error(w, cat, 1.0)
    try:
        e_opt = privacy.expected_error(w, opt, 1.0)
    except InfeasibleStrategyError:
        return cat
    return opt if e_opt < e_cat else cat


def make_selector(kind: str, p: int = None, restarts: int = 10, iters: int = 200,
                  seed: int = 0, inject_catalog: bool = True) -> Selector:
    """Selector factory used by the harness.

    The p-identity selector derives a fresh generator from ``seed`` and the
    workload contents, so a given workload always gets the same strategy and
    no call order dependence creeps in.
    """
    kind = kind.lower()
    if kind == "identity":
        return select_identity
    if kind == "catalog":
        return select_catalog
    if kind in ("p_identity", "pidentity", "hdmm"):
        def sel(w: Workload, rng: np.random.Generator = None) -> Strategy:
            if rng is None:
                rng = workload_rng(seed, w)
            return select_p_identity(w, p=p, restarts=restarts, iters=iters, rng=rng,
                                     inject_catalog=inject_catalog)
        sel.kind = "p_identity"
        return sel
    raise PreconditionError(f"unknown selector kind {kind!r}")


def workload_rng(seed: int, w: Workload) -> np.random.Generator:
    digest = hashlib.sha256(np.ascontiguousarray(w.matrix).tobytes()).digest()
    return np.random.default_rng([int(seed), int.from_bytes(digest[:8], "little")])
