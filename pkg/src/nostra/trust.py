"""Trust regions from Pareto-membership probabilities.

Each candidate's probability of lying on the Pareto frontier is estimated by
drawing joint realizations of the surrogate posteriors and counting how often
the candidate is non-dominated. Candidates are then grouped by that scalar
probability with 1-D k-means; each cluster's weight is the mean probability of
its members and scales the acquisition value of every candidate it contains.
Clusters are formed in probability space, so one cluster may cover several
disconnected patches of the design space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ClusteringError, DimensionError
from .gp import draw_marginals, predict
from .pareto import nondominated_mask, nondominated_mask_2d

__all__ = [
    "CandidatePool",
    "ParetoProbabilityField",
    "Clustering",
    "build_pool",
    "pareto_probabilities",
    "kmeans_probs",
    "wcss",
    "wcss_curve",
    "elbow_select_k",
    "cluster_weights",
    "weighted_scores",
    "select_argmax",
]


@dataclass(frozen=True, eq=False)
class CandidatePool:
    """Candidate designs with per-objective posterior summaries.

    ``means`` and ``variances`` have shape ``(m, k_objectives)``.
    """

    inputs: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        mu = np.asarray(self.means, dtype=float)
        var = np.asarray(self.variances, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None]
            var = var.reshape(-1, 1)
        if mu.shape != var.shape or mu.shape[0] != x.shape[0]:
            raise DimensionError("pool inputs, means and variances disagree in shape")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def m(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True, eq=False)
class ParetoProbabilityField:
    probs: np.ndarray
    n_used: int


@dataclass(frozen=True, eq=False)
class Clustering:
    """A partition of the candidates by probability value.

    Labels are canonical: cluster 0 has the smallest center.
    """

    k: int
    labels: np.ndarray
    centers: np.ndarray
    weights: np.ndarray
    wcss_history: tuple = field(default=(), repr=False)


def build_pool(models, inputs) -> CandidatePool:
    """Evaluate every model's latent posterior on the candidate inputs."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    means, variances = [], []
    for model in models:
        mu, var = predict(model, inputs)
        means.append(mu)
        variances.append(var)
    return CandidatePool(inputs, np.column_stack(means), np.column_stack(variances))


def pareto_probabilities(pool: CandidatePool, n_samples: int = 256,
                         seed=None) -> ParetoProbabilityField:
    """Estimate each candidate's probability of being Pareto-optimal.

    Every realization draws all candidates independently from their marginal
    posteriors, one objective at a time, and the membership counts are
    averaged over ``n_samples`` realizations.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    draws = draw_marginals(pool.means, pool.variances, n_samples, rng)
    if pool.means.shape[1] == 2:
        on_front = nondominated_mask_2d(draws)
    else:
        on_front = np.array([nondominated_mask(row) for row in draws])
    probs = on_front.mean(axis=0)
    return ParetoProbabilityField(probs, int(n_samples))


def _assign(values, centers):
    # nearest center in 1-D via midpoints; ties go to the lower center
    order = np.argsort(centers, kind="stable")
    sorted_centers = centers[order]
    mids = 0.5 * (sorted_centers[1:] + sorted_centers[:-1])
    return order[np.searchsorted(mids, values, side="left")]


def _wcss(values, labels, centers):
    return float(np.sum((values - centers[labels]) ** 2))


def _kmeanspp(values, k, rng):
    centers = [values[rng.integers(values.shape[0])]]
    d2 = (values - centers[0]) ** 2
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = values[rng.choice(values.shape[0], p=d2 / total)]
        else:
            # distinct values so close that their squared gaps underflow
            fresh = np.flatnonzero(~np.isin(values, centers))
            if fresh.size == 0:
                break
            nxt = values[rng.choice(fresh)]
        centers.append(nxt)
        d2 = np.minimum(d2, (values - nxt) ** 2)
    return np.array(centers)


def _lloyd(values, centers, max_iter):
    k = centers.shape[0]
    labels = _assign(values, centers)
    history = [_wcss(values, labels, centers)]
    for _ in range(max_iter):
        counts = np.bincount(labels, minlength=k)
        sums = np.bincount(labels, weights=values, minlength=k)
        new_centers = centers.copy()
        filled = counts > 0
        new_centers[filled] = sums[filled] / counts[filled]
        for j in np.flatnonzero(~filled):
            # move an empty cluster onto the worst-fitted point
            resid = (values - new_centers[labels]) ** 2
            worst = int(np.argmax(resid))
            new_centers[j] = values[worst]
            labels = labels.copy()
            labels[worst] = j
        history.append(_wcss(values, labels, new_centers))
        new_labels = _assign(values, new_centers)
        centers = new_centers
        history.append(_wcss(values, new_labels, centers))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return labels, centers, history


def _canonical(values, labels, centers, history):
    k = centers.shape[0]
    order = np.argsort(centers, kind="stable")
    relabel = np.empty(k, dtype=int)
    relabel[order] = np.arange(k)
    labels = relabel[labels]
    centers = centers[order]
    clustering = Clustering(k, labels, centers, np.zeros(k), tuple(history))
    weights = cluster_weights(values, clustering)
    return Clustering(k, labels, centers, weights, tuple(history))


def kmeans_probs(probs, k: int, seed=None, max_iter: int = 100,
                 n_init: int = 4) -> Clustering:
    """Lloyd's k-means on scalar probabilities with k-means++ seeding.

    The best of ``n_init`` seeded runs (lowest within-cluster sum of squares)
    is returned. ``wcss_history`` records the objective of that run after
    every assignment and update step.
    """
    values = np.asarray(probs, dtype=float).reshape(-1)
    if k < 1:
        raise ClusteringError("k must be at least 1")
    n_distinct = np.unique(values).shape[0]
    if k > n_distinct:
        raise ClusteringError(
            f"cannot form {k} clusters from {n_distinct} distinct values"
        )
    if k == 1:
        center = np.array([values.mean()])
        labels = np.zeros(values.shape[0], dtype=int)
        return _canonical(values, labels, center, [_wcss(values, labels, center)])
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        centers = _kmeanspp(values, k, rng)
        labels, centers, history = _lloyd(values, centers, max_iter)
        score = history[-1]
        if best is None or score < best[0]:
            best = (score, labels, centers, history)
    _, labels, centers, history = best
    return _canonical(values, labels, centers, history)


def wcss(probs, clustering: Clustering) -> float:
    """Within-cluster sum of squared deviations from the cluster centers."""
    values = np.asarray(probs, dtype=float).reshape(-1)
    return _wcss(values, clustering.labels, clustering.centers)


def wcss_curve(probs, k_max: int = 10, seed=None) -> np.ndarray:
    """WCSS for ``k = 1 .. min(k_max, distinct values)``."""
    values = np.asarray(probs, dtype=float).reshape(-1)
    k_top = min(int(k_max), np.unique(values).shape[0])
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    children = ss.spawn(k_top)
    return np.array([
        wcss(values, kmeans_probs(values, k, seed=children[k - 1]))
        for k in range(1, k_top + 1)
    ])


def elbow_select_k(probs, k_max: int = 10, seed=None) -> int:
    """Cluster count at the sharpest bend of the WCSS curve.

    The bend is the interior ``k`` with the largest discrete second
    difference ``W(k-1) - 2 W(k) + W(k+1)``. Fewer than three distinct
    probability values give ``k = 1``.
    """
    if k_max < 3:
        raise ValueError("k_max must be at least 3")
    values = np.asarray(probs, dtype=float).reshape(-1)
    if np.unique(values).shape[0] < 3:
        return 1
    curve = wcss_curve(values, k_max, seed)
    return _elbow_from_curve(curve)


def _elbow_from_curve(curve) -> int:
    curve = np.asarray(curve, dtype=float)
    if curve.shape[0] < 3:
        return 1
    second = curve[:-2] - 2.0 * curve[1:-1] + curve[2:]
    return int(np.argmax(second)) + 2


def cluster_weights(probs, clustering: Clustering) -> np.ndarray:
    """Mean member probability of every cluster."""
    values = np.asarray(probs, dtype=float).reshape(-1)
    k = clustering.k
    counts = np.bincount(clustering.labels, minlength=k)
    if np.any(counts == 0):
        raise ClusteringError("empty cluster")
    sums = np.bincount(clustering.labels, weights=values, minlength=k)
    return sums / counts


def weighted_scores(ehvi_values, clustering: Clustering) -> np.ndarray:
    """Acquisition value of each candidate scaled by its cluster's weight."""
    ehvi_values = np.asarray(ehvi_values, dtype=float).reshape(-1)
    if ehvi_values.shape[0] != clustering.labels.shape[0]:
        raise DimensionError("ehvi values and cluster labels differ in length")
    return ehvi_values * clustering.weights[clustering.labels]


def select_argmax(scores, seed=None) -> int:
    """Index of the best score; ties resolved by a seeded shuffle."""
    scores = np.asarray(scores, dtype=float).reshape(-1)
    perm = np.random.default_rng(seed).permutation(scores.shape[0])
    return int(perm[np.argmax(scores[perm])])
