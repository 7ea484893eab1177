"""Sparse signal container shared by the generator, operator and solver layers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SparseSignal:
    """An m-sparse vector in R^n stored as (support, values).

    Support indices are 0-based, sorted and distinct; stored values are
    nonzero.
    """

    n: int
    support: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if support.ndim != 1 or values.shape != support.shape:
            raise ValueError("support and values must be 1-D and equally long")
        if support.size > self.n:
            raise ValueError("more support indices than ambient dimension")
        if support.size:
            if support.min() < 0 or support.max() >= self.n:
                raise ValueError("support index out of range")
            if np.any(np.diff(support) <= 0):
                raise ValueError("support must be sorted and distinct")
            if np.any(values == 0.0):
                raise ValueError("stored values must be nonzero")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @property
    def sparsity(self) -> int:
        return int(self.support.size)

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.support] = self.values
        return x

    @classmethod
    def from_dense(cls, x, tol: float = 0.0) -> "SparseSignal":
        x = np.asarray(x, dtype=np.float64)
        support = np.flatnonzero(np.abs(x) > tol)
        return cls(n=x.size, support=support, values=x[support])
