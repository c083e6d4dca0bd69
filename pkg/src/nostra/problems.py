"""Analytic benchmark objectives with homoscedastic noise.

Noise on objective ``i`` has standard deviation ``noise_fraction * range_i``
where ``range_i`` is the spread of the noise-free objective over its domain,
measured on a dense grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .domain import DesignDomain
from .exceptions import DomainError

__all__ = [
    "NOISE_PRESETS",
    "TestProblem",
    "NoisyObservation",
    "bohachevsky_sphere",
    "branin_currin",
    "branin",
    "currin",
    "currin_exp_factor",
    "compute_ranges",
    "observe",
    "get_problem",
    "PROBLEM_NAMES",
]

NOISE_PRESETS = (0.05, 0.10, 0.15, 0.20)

_BRANIN_A = 1.0
_BRANIN_B = 5.1 / (4.0 * math.pi**2)
_BRANIN_C = 5.0 / math.pi
_BRANIN_R = 6.0
_BRANIN_S = 10.0
_BRANIN_T = 1.0 / (8.0 * math.pi)


def _points(x, d=2):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise DomainError(f"expected {d}-dimensional inputs, got shape {x.shape}")
    return x


def _check_box(x, lower, upper):
    if np.any(x < lower - 1e-12) or np.any(x > upper + 1e-12) or not np.all(np.isfinite(x)):
        raise DomainError(f"input outside [{lower}, {upper}]^2")


def _bohachevsky_sphere_values(x, classical=False):
    x1, x2 = x[..., 0], x[..., 1]
    f1 = (x1 - 8.0) ** 2 + (x2 - 8.0) ** 2
    second = x2 if classical else x1
    f2 = (x1**2 + 2.0 * x2**2 - 0.3 * np.cos(3.0 * math.pi * x1)
          - 0.4 * np.cos(4.0 * math.pi * second) + 0.7)
    return np.stack([f1, f2], axis=-1)


def bohachevsky_sphere(x, classical: bool = False):
    """Sphere centred at (8, 8) against a Bohachevsky bowl at the origin.

    ``x`` is in raw units on ``[0, 10]^2``. By default both cosine terms of
    the Bohachevsky objective take the first coordinate; ``classical=True``
    uses the second coordinate in the ``cos(4 pi .)`` term instead.
    """
    x = _points(x)
    _check_box(x, 0.0, 10.0)
    return _bohachevsky_sphere_values(x, classical)


def _branin_values(u):
    x0 = 15.0 * u[..., 0] - 5.0
    x1 = 15.0 * u[..., 1]
    return (_BRANIN_A * (x1 - _BRANIN_B * x0**2 + _BRANIN_C * x0 - _BRANIN_R) ** 2
            + _BRANIN_S * (1.0 - _BRANIN_T) * np.cos(x0) + _BRANIN_S)


def currin_exp_factor(x1):
    """``1 - exp(-1 / (2 x1))``, continuously extended by 1 at ``x1 = 0``."""
    x1 = np.asarray(x1, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(x1 > 0, -np.expm1(-1.0 / (2.0 * np.where(x1 > 0, x1, 1.0))), 1.0)
    return out if out.ndim else float(out)


def _currin_values(u):
    x0, x1 = u[..., 0], u[..., 1]
    num = 2300.0 * x0**3 + 1900.0 * x0**2 + 2092.0 * x0 + 60.0
    den = 100.0 * x0**3 + 500.0 * x0**2 + 4.0 * x0 + 20.0
    return currin_exp_factor(x1) * num / den


def branin(u):
    """Branin on the unit box, rescaled to ``[-5, 10] x [0, 15]``."""
    u = _points(u)
    _check_box(u, 0.0, 1.0)
    return _branin_values(u)


def currin(u):
    """Currin exponential function on the unit box."""
    u = _points(u)
    _check_box(u, 0.0, 1.0)
    return _currin_values(u)


def _branin_currin_values(u):
    return np.stack([_branin_values(u), _currin_values(u)], axis=-1)


def branin_currin(u):
    """Branin and Currin evaluated on a shared unit-box input."""
    u = _points(u)
    _check_box(u, 0.0, 1.0)
    return _branin_currin_values(u)


@dataclass(frozen=True)
class NoisyObservation:
    input: np.ndarray
    values: np.ndarray
    noise_draws: np.ndarray
    noise_free: np.ndarray


@dataclass(frozen=True, eq=False)
class TestProblem:
    """A noise-free vector objective plus its noise model.

    ``evaluator`` maps raw inputs of shape ``(..., d)`` to objective values
    of shape ``(..., k_objectives)`` and is assumed to be vectorized.
    """

    name: str
    domain: DesignDomain
    evaluator: Callable = field(repr=False)
    k_objectives: int = 2
    noise_fraction: float = 0.0
    grid_resolution: int = 256

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not (0.0 <= self.noise_fraction < 1.0):
            raise ValueError("noise_fraction must lie in [0, 1)")

    @property
    def d(self) -> int:
        return self.domain.d

    def evaluate(self, x):
        """Noise-free objective values at raw input(s) ``x``."""
        x = np.asarray(x, dtype=float)
        if not self.domain.contains(x):
            raise DomainError(f"{self.name}: input outside the domain")
        return np.asarray(self.evaluator(x), dtype=float).reshape(
            x.shape[:-1] + (self.k_objectives,))

    @property
    def ranges(self) -> np.ndarray:
        return compute_ranges(self, self.grid_resolution)

    @property
    def noise_sd(self) -> np.ndarray:
        return self.noise_fraction * self.ranges

    @property
    def ref_point(self) -> np.ndarray:
        """Worst grid value of every objective, pushed out by 10% of its range."""
        lo, hi = _grid_extrema(self, self.grid_resolution)
        return hi + 0.1 * (hi - lo)

    def with_noise(self, noise_fraction: float) -> "TestProblem":
        return replace(self, noise_fraction=float(noise_fraction))

    def observe(self, x, seed=None) -> NoisyObservation:
        return observe(self, x, seed)


_EXTREMA_CACHE: dict = {}


def _grid_extrema(problem: TestProblem, resolution: int):
    key = (problem.name, problem.evaluator, tuple(problem.domain.lower),
           tuple(problem.domain.upper), int(resolution))
    if key not in _EXTREMA_CACHE:
        axes = [np.linspace(lo, hi, resolution)
                for lo, hi in zip(problem.domain.lower, problem.domain.upper)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, problem.d)
        vals = np.asarray(problem.evaluator(grid), dtype=float).reshape(
            -1, problem.k_objectives)
        _EXTREMA_CACHE[key] = (vals.min(axis=0), vals.max(axis=0))
    lo, hi = _EXTREMA_CACHE[key]
    return lo.copy(), hi.copy()


def compute_ranges(problem: TestProblem, grid_resolution: int = 256) -> np.ndarray:
    """Spread ``max - min`` of each noise-free objective over a dense grid."""
    if grid_resolution < 64:
        raise ValueError("grid_resolution must be at least 64 per dimension")
    lo, hi = _grid_extrema(problem, grid_resolution)
    spread = hi - lo
    if not np.all(spread > 0):
        raise ValueError(f"{problem.name}: objective with zero range")
    return spread


def observe(problem: TestProblem, x, seed=None) -> NoisyObservation:
    """Noise-free values plus independent Gaussian noise per objective."""
    x = np.asarray(x, dtype=float).reshape(-1)
    clean = problem.evaluate(x).reshape(-1)
    if problem.noise_fraction > 0:
        draws = np.random.default_rng(seed).standard_normal(problem.k_objectives)
        eps = draws * problem.noise_sd
    else:
        draws = np.zeros(problem.k_objectives)
        eps = draws
    return NoisyObservation(x, clean + eps, draws, clean)


def _make(name, classical=False):
    if name == "bohachevsky-sphere":
        evaluator = (_bohachevsky_sphere_classical if classical
                     else _bohachevsky_sphere_values)
        return TestProblem(name, DesignDomain([0.0, 0.0], [10.0, 10.0]), evaluator)
    if name == "branin-currin":
        return TestProblem(name, DesignDomain.unit(2), _branin_currin_values)
    if name == "branin":
        return TestProblem(name, DesignDomain.unit(2), _branin_values, k_objectives=1)
    if name == "currin":
        return TestProblem(name, DesignDomain.unit(2), _currin_values, k_objectives=1)
    raise KeyError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")


def _bohachevsky_sphere_classical(x):
    return _bohachevsky_sphere_values(x, classical=True)


PROBLEM_NAMES = ("bohachevsky-sphere", "branin-currin", "currin", "branin")


def get_problem(name: str, noise_fraction: float = 0.05,
                classical: bool = False) -> TestProblem:
    """Look up a registered problem by name and attach a noise level."""
    return _make(name, classical).with_noise(noise_fraction)
