"""Laplace measurement, least-squares reconstruction and the matrix-mechanism error."""
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import matcore
from .errors import DimensionError, InfeasibleStrategyError, PreconditionError
from .strategy import Strategy, as_strategy
from .workloads import Workload

FEASIBILITY_TOL = 1e-6


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float

    def __post_init__(self):
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise PreconditionError(f"epsilon must be positive and finite, got {self.epsilon}")

    def __float__(self):
        return float(self.epsilon)


BudgetLike = Union[PrivacyBudget, float]


def _eps(budget: BudgetLike) -> float:
    return budget.epsilon if isinstance(budget, PrivacyBudget) else PrivacyBudget(float(budget)).epsilon


def _wmat(w) -> np.ndarray:
    return w.matrix if isinstance(w, Workload) else matcore.as_matrix(w)


@dataclass(frozen=True, eq=False)
class Measurement:
    strategy: Strategy
    noisy_answers: np.ndarray
    noise_scale: float


def laplace_noise(scale: float, shape, rng: np.random.Generator) -> np.ndarray:
    """Laplace(0, scale) draws by inverse CDF on uniform(-0.5, 0.5)."""
    if not scale > 0:
        raise PreconditionError(f"Laplace scale must be positive, got {scale}")
    u = rng.uniform(-0.5, 0.5, size=shape)
    # u == -0.5 has probability 2**-53 but would give log(0)
    mag = np.minimum(2.0 * np.abs(u), 1.0 - 2.0**-53)
    return -scale * np.sign(u) * np.log1p(-mag)


def laplace_vector(scale: float, m: int, rng: np.random.Generator) -> np.ndarray:
    if m < 1:
        raise PreconditionError(f"need at least one draw, got m={m}")
    return laplace_noise(scale, m, rng)


def measure(a, x, budget: BudgetLike, rng: np.random.Generator, noiseless: bool = False) -> Measurement:
    """Answer strategy ``a`` on data ``x`` with Laplace noise of scale ||A||_1 / eps."""
    a = as_strategy(a)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != a.n:
        raise DimensionError(f"data vector of length {x.shape} does not match strategy with {a.n} columns")
    scale = a.sensitivity / _eps(budget)
    y = a.matrix @ x
    if not noiseless:
        y = y + laplace_vector(scale, a.shape[0], rng)
    return Measurement(a, y, scale)


def reconstruct(meas: Measurement) -> np.ndarray:
    return meas.strategy.pinv @ meas.noisy_answers


def reconstruction_sq(w, a) -> float:
    """||W A^+||_F^2, raising if ``a`` cannot reconstruct ``w``."""
    a = as_strategy(a)
    wm = _wmat(w)
    if not matcore.spans_rowspace(wm, a.matrix, FEASIBILITY_TOL, a_pinv=a.pinv):
        raise InfeasibleStrategyError(
            f"strategy {a.shape} does not span the row space of workload {wm.shape}")
    return matcore.frobenius_sq(wm @ a.pinv)


def expected_error(w, a, budget: BudgetLike) -> float:
    """Expected total squared error 2/eps^2 * ||A||_1^2 * ||W A^+||_F^2."""
    a = as_strategy(a)
    eps = _eps(budget)
    return 2.0 / eps**2 * a.sensitivity**2 * reconstruction_sq(w, a)


def compose_budgets(parts: Sequence[BudgetLike]) -> PrivacyBudget:
    """Sequential composition: epsilons add."""
    if not parts:
        raise PreconditionError("cannot compose an empty list of budgets")
    return PrivacyBudget(float(sum(_eps(p) for p in parts)))
