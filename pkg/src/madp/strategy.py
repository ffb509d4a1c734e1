from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import matcore


@dataclass(frozen=True, eq=False)
class Strategy:
    """A measurement matrix with its L1 column norms and sensitivity cached."""
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "matrix", matcore.as_matrix(self.matrix))

    @cached_property
    def column_l1(self) -> np.ndarray:
        return matcore.l1_column_norms(self.matrix)

    @cached_property
    def sensitivity(self) -> float:
        return float(self.column_l1.max())

    @cached_property
    def pinv(self) -> np.ndarray:
        return matcore.pseudo_inverse(self.matrix)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def columns_normalized(self, tol: float = 1e-9) -> bool:
        """Every nonzero column has unit L1 norm."""
        c = self.column_l1
        nz = c > 0
        return bool(np.all(np.abs(c[nz] - 1.0) <= tol))

    def __eq__(self, other):
        return isinstance(other, Strategy) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


def as_strategy(a) -> Strategy:
    return a if isinstance(a, Strategy) else Strategy(a)
