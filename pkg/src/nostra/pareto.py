"""Pareto dominance, frontier extraction, 2-D hypervolume and Monte Carlo EHVI.

Every objective is minimized. Maximization problems are negated before they
reach this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, ReferencePointError

__all__ = [
    "ParetoSet",
    "dominates",
    "nondominated_mask",
    "nondominated_mask_2d",
    "pareto_front",
    "hv_2d",
    "hvi",
    "hvi_2d_batch",
    "ehvi_mc",
    "ehvi_mc_batch",
]


@dataclass(frozen=True, eq=False)
class ParetoSet:
    """Mutually non-dominated objective vectors and where they came from."""

    points: np.ndarray
    source_indices: np.ndarray

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def empty(cls, k=2):
        return cls(np.empty((0, k)), np.empty(0, dtype=int))


def _as_points(points, k=None):
    if isinstance(points, ParetoSet):
        points = points.points
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, k if k is not None else (arr.shape[-1] if arr.ndim == 2 else 2))
    arr = np.atleast_2d(arr)
    if k is not None and arr.shape[1] != k:
        raise DimensionError(f"expected {k} objectives, got {arr.shape[1]}")
    return arr


def dominates(a, b) -> bool:
    """``a`` dominates ``b``: no worse everywhere and strictly better somewhere."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_mask(points) -> np.ndarray:
    """Boolean mask of the non-dominated rows, any number of objectives."""
    y = _as_points(points)
    le = np.all(y[:, None, :] <= y[None, :, :], axis=2)
    lt = np.any(y[:, None, :] < y[None, :, :], axis=2)
    # dominated[j] if some i has le[i, j] & lt[i, j]
    return ~np.any(le & lt, axis=0)


def nondominated_mask_2d(values) -> np.ndarray:
    """Non-dominated mask for bi-objective sets, vectorized over leading axes.

    ``values`` has shape ``(..., n, 2)``; the result has shape ``(..., n)``.
    Runs in ``O(n log n)`` per set via a lexicographic sort and handles
    duplicated points (duplicates never dominate each other).
    """
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != 2:
        raise DimensionError("nondominated_mask_2d needs exactly two objectives")
    lead = v.shape[:-2]
    n = v.shape[-2]
    v = v.reshape(-1, n, 2)
    f1, f2 = v[..., 0], v[..., 1]
    order = np.argsort(f2, axis=1, kind="stable")
    order = np.take_along_axis(
        order, np.argsort(np.take_along_axis(f1, order, axis=1), axis=1,
                          kind="stable"), axis=1)
    s1 = np.take_along_axis(f1, order, axis=1)
    s2 = np.take_along_axis(f2, order, axis=1)
    idx = np.broadcast_to(np.arange(n), s1.shape)
    new_group = np.ones_like(s1, dtype=bool)
    new_group[:, 1:] = s1[:, 1:] != s1[:, :-1]
    group_start = np.maximum.accumulate(np.where(new_group, idx, 0), axis=1)
    # minimum f2 over all strictly smaller f1 values
    running = np.minimum.accumulate(s2, axis=1)
    prev = np.full_like(s2, np.inf)
    has_prev = group_start > 0
    prev[has_prev] = np.take_along_axis(
        running, np.where(has_prev, group_start - 1, 0), axis=1)[has_prev]
    group_min = np.take_along_axis(s2, group_start, axis=1)
    dominated_sorted = (prev <= s2) | (group_min < s2)
    mask = np.empty_like(dominated_sorted)
    np.put_along_axis(mask, order, ~dominated_sorted, axis=1)
    return mask.reshape(lead + (n,))


def pareto_front(points) -> ParetoSet:
    """Non-dominated subset of ``points`` with original indices, in input order."""
    y = _as_points(points)
    if y.shape[0] == 0:
        raise ValueError("cannot extract a frontier from an empty set")
    if y.shape[1] < 2:
        raise DimensionError("a frontier needs at least two objectives")
    mask = nondominated_mask_2d(y) if y.shape[1] == 2 else nondominated_mask(y)
    idx = np.flatnonzero(mask)
    return ParetoSet(y[idx].copy(), idx)


def _check_ref(ref):
    r = np.asarray(ref, dtype=float).reshape(-1)
    if r.shape[0] != 2:
        raise DimensionError("hv_2d needs a 2-D reference point")
    if not np.all(np.isfinite(r)):
        raise ValueError("reference point must be finite")
    return r


def hv_2d(front, ref, clip: bool = False) -> float:
    """Exact area dominated by ``front`` inside the box bounded by ``ref``.

    Points outside the box raise :class:`ReferencePointError` unless ``clip``
    is set, in which case they are clipped to ``ref`` and add no area.
    Dominated points in ``front`` are harmless.
    """
    r = _check_ref(ref)
    y = _as_points(front, 2)
    if y.shape[0] == 0:
        return 0.0
    if clip:
        y = np.minimum(y, r)
    elif np.any(y > r):
        raise ReferencePointError("frontier point exceeds the reference point")
    y = y[np.lexsort((y[:, 1], y[:, 0]))]
    area = 0.0
    best2 = r[1]
    for p1, p2 in y:
        if p2 < best2:
            area += (r[0] - p1) * (best2 - p2)
            best2 = p2
    return float(area)


def hvi(new_points, current, ref, clip: bool = False) -> float:
    """Hypervolume gained by adding ``new_points`` to the current frontier."""
    new = _as_points(new_points, 2)
    cur = _as_points(current, 2)
    union = np.vstack([cur, new]) if new.shape[0] else cur
    gain = hv_2d(union, ref, clip=clip) - hv_2d(cur, ref, clip=clip)
    return max(gain, 0.0)


def _staircase(current, r):
    """Segments of the region left undominated by ``current``.

    Returns ``(lo, hi, height)``: over ``t in [lo, hi)`` in the first
    objective, second-objective values below ``height`` are undominated.
    """
    cur = np.minimum(_as_points(current, 2), r)
    if cur.shape[0]:
        cur = cur[nondominated_mask_2d(cur)]
        cur = cur[np.argsort(cur[:, 0], kind="stable")]
    lo = np.concatenate([[-np.inf], cur[:, 0]])
    hi = np.concatenate([cur[:, 0], [r[0]]])
    height = np.concatenate([[r[1]], cur[:, 1]])
    return lo, hi, height


def hvi_2d_batch(samples, current, ref) -> np.ndarray:
    """Single-point hypervolume improvement for every row of ``samples``.

    ``samples`` has shape ``(..., 2)``. Equivalent to calling :func:`hvi` with
    one new point and ``clip=True``, but vectorized through the staircase of
    the current frontier.
    """
    r = _check_ref(ref)
    s = np.asarray(samples, dtype=float)
    lo, hi, height = _staircase(current, r)
    y1 = s[..., 0, None]
    y2 = s[..., 1, None]
    width = np.clip(np.minimum(hi, r[0]) - np.maximum(lo, y1), 0.0, None)
    depth = np.clip(height - y2, 0.0, None)
    return np.sum(width * depth, axis=-1)


def ehvi_mc(means, variances, current, ref, n_samples: int = 128, seed=None) -> float:
    """Monte Carlo expected hypervolume improvement at one candidate.

    Each objective is drawn independently from ``Normal(mean, variance)``.
    With the same ``seed`` this matches the corresponding entry of
    :func:`ehvi_mc_batch`.
    """
    means = np.asarray(means, dtype=float).reshape(1, -1)
    variances = np.asarray(variances, dtype=float).reshape(1, -1)
    return float(ehvi_mc_batch(means, variances, current, ref, n_samples, seed)[0])


def ehvi_mc_batch(means, variances, current, ref, n_samples: int = 128,
                  seed=None) -> np.ndarray:
    """Monte Carlo EHVI for ``m`` candidates at once.

    ``means`` and ``variances`` have shape ``(m, 2)``. One block of standard
    normal draws of shape ``(n_samples, 2)`` is shared by all candidates, so
    candidate scores are compared under common random numbers.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    means = np.atleast_2d(np.asarray(means, dtype=float))
    sd = np.sqrt(np.clip(np.atleast_2d(np.asarray(variances, dtype=float)), 0.0, None))
    if means.shape != sd.shape or means.shape[1] != 2:
        raise DimensionError("means and variances must both have shape (m, 2)")
    z = np.random.default_rng(seed).standard_normal((int(n_samples), 2))
    samples = means[:, None, :] + sd[:, None, :] * z[None, :, :]
    return hvi_2d_batch(samples, current, ref).mean(axis=1)
