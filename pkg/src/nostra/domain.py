"""Box-shaped design domains and their mapping to the unit box."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError


@dataclass(frozen=True, eq=False)
class DesignDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionError("lower and upper bounds differ in length")
        if not np.all(lo < hi):
            raise ValueError("every lower bound must be below its upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, d):
        return cls(np.zeros(d), np.ones(d))

    @property
    def d(self) -> int:
        return self.lower.shape[0]

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.lower) / (self.upper - self.lower)

    def from_unit(self, u):
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    def contains(self, x, atol=1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}
