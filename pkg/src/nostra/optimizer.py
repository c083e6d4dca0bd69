"""Sequential trust-region multi-objective Bayesian optimization.

One iteration:

1. fit one prior-informed GP per objective on all observations so far;
2. draw a space-filling candidate pool and estimate each candidate's
   probability of being Pareto-optimal;
3. cluster the probabilities and weight each cluster by its mean probability;
4. score candidates by Monte Carlo EHVI times their cluster weight, evaluate
   the best one and append the observation.

Every random draw comes from a seed keyed on ``(config.seed, iteration,
stage)``, so a run is reproducible bit for bit and stages do not share
streams. With ``cluster_mode="none"`` all weights are 1 and the loop reduces
to plain EHVI selection.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .domain import DesignDomain
from .exceptions import ConditioningError, FitError, IterationError
from .gp import TrainingSet, fit_map
from .pareto import ParetoSet, ehvi_mc_batch, pareto_front
from .trust import (
    build_pool,
    elbow_select_k,
    kmeans_probs,
    pareto_probabilities,
    select_argmax,
    weighted_scores,
)

__all__ = [
    "OptimizerConfig",
    "OptimizerState",
    "IterationRecord",
    "ExperimentRecord",
    "AskTellOptimizer",
    "parse_cluster_mode",
    "init_design",
    "initial_state",
    "propose",
    "iterate",
    "run",
    "current_frontier",
]

# stage keys for derived seeds
_INIT, _LOOP = 0, 1
_FIT, _POOL, _PROB, _CLUSTER, _EHVI, _TIE, _NOISE = range(7)


def parse_cluster_mode(mode):
    """Normalize a cluster mode to ``("none"|"elbow", None)`` or ``("fixed", k)``.

    Accepts ``"none"``, ``"baseline"``, ``"elbow"``, an integer, ``"fixed4"``,
    ``"fixed(4)"`` or ``"fixed-4"``.
    """
    if isinstance(mode, (int, np.integer)) and not isinstance(mode, bool):
        k = int(mode)
    else:
        text = str(mode).strip().lower()
        if text in ("none", "baseline"):
            return ("none", None)
        if text == "elbow":
            return ("elbow", None)
        digits = text.removeprefix("fixed").strip("()-_ ")
        if not digits.isdigit():
            raise ValueError(f"unknown cluster mode {mode!r}")
        k = int(digits)
    if k < 1:
        raise ValueError("a fixed cluster count must be at least 1")
    return ("fixed", k)


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for one optimization run.

    ``budget`` counts every true-function evaluation, the initial design
    included. ``noise_sd`` (raw units, one per objective) turns on
    noise-informed priors; explicit ``priors`` take precedence and are used
    as given (standardized units).
    """

    d: int
    budget: int
    k_objectives: int = 2
    n_init: int | None = None
    cluster_mode: str | int = "elbow"
    pool_size: int = 500
    n_prob: int = 256
    n_ehvi: int = 128
    k_max: int = 10
    priors: tuple | None = None
    noise_sd: tuple | None = None
    restarts: int = 8
    seed: int = 0
    stop_epsilon: float | None = None
    fixed_pool: bool = False
    ref_point: tuple | None = None
    frontier: str = "observed"

    def __post_init__(self):
        if self.n_init is None:
            object.__setattr__(self, "n_init", 2 * self.d)
        parse_cluster_mode(self.cluster_mode)
        if self.n_init < 2:
            raise ValueError("n_init must be at least 2")
        if self.budget < self.n_init:
            raise ValueError("budget must cover the initial design")
        if self.pool_size < 2:
            raise ValueError("pool_size must be at least 2")
        if self.n_prob < 1 or self.n_ehvi < 1 or self.restarts < 1:
            raise ValueError("sample and restart counts must be positive")
        if self.k_max < 3:
            raise ValueError("k_max must be at least 3")
        if self.frontier not in ("observed", "posterior-mean"):
            raise ValueError("frontier must be 'observed' or 'posterior-mean'")
        for name in ("priors", "noise_sd", "ref_point"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(value))

    @property
    def mode(self):
        return parse_cluster_mode(self.cluster_mode)

    def to_dict(self):
        out = asdict(self)
        if self.priors is not None:
            out["priors"] = [asdict(p) for p in self.priors]
        for name in ("noise_sd", "ref_point"):
            if out[name] is not None:
                out[name] = [float(v) for v in out[name]]
        return out


def _seed(config, *key):
    return np.random.SeedSequence(config.seed, spawn_key=tuple(int(k) for k in key))


def init_design(d: int, n_init: int, seed=None) -> np.ndarray:
    """Latin hypercube sample of ``n_init`` points in the unit box."""
    if n_init < 2:
        raise ValueError("n_init must be at least 2")
    sampler = qmc.LatinHypercube(d=d, seed=np.random.default_rng(seed))
    return sampler.random(n_init)


@dataclass(frozen=True, eq=False)
class OptimizerState:
    """Observations so far, in unit-box inputs and raw objective values."""

    inputs: np.ndarray
    outputs: np.ndarray
    iteration: int = 0

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def append(self, x_unit, y) -> "OptimizerState":
        return OptimizerState(
            np.vstack([self.inputs, np.asarray(x_unit, dtype=float).reshape(1, -1)]),
            np.vstack([self.outputs, np.asarray(y, dtype=float).reshape(1, -1)]),
            self.iteration + 1,
        )


def current_frontier(state: OptimizerState) -> ParetoSet:
    """Pareto front of the observed (noisy) objective vectors."""
    return pareto_front(state.outputs)


def _priors_for(config, k):
    if config.priors is not None:
        return config.priors[k], None
    if config.noise_sd is not None:
        return "auto", float(config.noise_sd[k])
    return None, None


def fit_models(state: OptimizerState, config: OptimizerConfig, iteration=None):
    """One GP per objective, each with its own derived seed."""
    t = state.iteration if iteration is None else iteration
    models = []
    for k in range(config.k_objectives):
        prior, noise_sd = _priors_for(config, k)
        train = TrainingSet(state.inputs, state.outputs[:, k], noise_sd=noise_sd)
        models.append(fit_map(train, prior=prior, restarts=config.restarts,
                              seed=_seed(config, _LOOP, t, _FIT, k)))
    return models


def _pool_inputs(config, t):
    key = (_LOOP, 0, _POOL, 1) if config.fixed_pool else (_LOOP, t, _POOL)
    sampler = qmc.LatinHypercube(d=config.d, seed=np.random.default_rng(_seed(config, *key)))
    return sampler.random(config.pool_size)


@dataclass(frozen=True, eq=False)
class Proposal:
    x_unit: np.ndarray
    index: int
    ehvi: float
    weighted_ehvi: float
    k_used: int | None
    diagnostics: dict = field(default_factory=dict)


def propose(state: OptimizerState, config: OptimizerConfig, ref_point=None,
            pool_inputs=None) -> Proposal:
    """Choose the next design without evaluating it.

    ``pool_inputs`` overrides the candidate pool (unit box), mainly for tests.
    """
    t = state.iteration
    ref = np.asarray(ref_point if ref_point is not None else config.ref_point, dtype=float)
    if ref.ndim == 0 or ref.shape[0] != config.k_objectives:
        raise ValueError("a reference point with one entry per objective is required")
    try:
        models = fit_models(state, config)
    except (FitError, ConditioningError) as exc:
        raise IterationError(f"surrogate fit failed at iteration {t}: {exc}",
                             {"iteration": t, "n": state.n,
                              "fit_diagnostics": getattr(exc, "diagnostics", [])}) from exc

    cand = _pool_inputs(config, t) if pool_inputs is None else np.atleast_2d(pool_inputs)
    pool = build_pool(models, cand)

    if config.frontier == "posterior-mean":
        front = pareto_front(build_pool(models, state.inputs).means)
    else:
        front = current_frontier(state)
    ehvi = ehvi_mc_batch(pool.means, pool.variances, front, ref,
                         config.n_ehvi, _seed(config, _LOOP, t, _EHVI))

    kind, k = config.mode
    diag = {
        "omega": [m.params.omega for m in models],
        "delta2": [m.params.delta2 for m in models],
        "sigma2": [m.params.sigma2 for m in models],
        "frontier_size": len(front),
    }
    if kind == "none":
        scores = ehvi
        k_used = None
    else:
        probs = pareto_probabilities(pool, config.n_prob,
                                     _seed(config, _LOOP, t, _PROB)).probs
        n_distinct = np.unique(probs).shape[0]
        if kind == "elbow":
            k_used = elbow_select_k(probs, config.k_max,
                                    _seed(config, _LOOP, t, _CLUSTER, 0))
        else:
            k_used = min(k, n_distinct)
        clustering = kmeans_probs(probs, k_used, _seed(config, _LOOP, t, _CLUSTER, 1))
        scores = weighted_scores(ehvi, clustering)
        diag["cluster_weights"] = clustering.weights.tolist()
        diag["trust_cluster_size"] = int(np.sum(clustering.labels == clustering.k - 1))
        diag["probs_sum"] = float(probs.sum())

    idx = select_argmax(scores, _seed(config, _LOOP, t, _TIE))
    diag["pool"] = pool
    diag["scores"] = scores
    diag["ehvi_values"] = ehvi
    return Proposal(cand[idx].copy(), idx, float(ehvi[idx]), float(scores[idx]),
                    k_used, diag)


@dataclass
class IterationRecord:
    iteration: int
    x_unit: list
    x_raw: list
    observation: list
    noise_free: list | None
    ehvi: float
    weighted_ehvi: float
    k_used: int | None
    omega: list
    delta2: list
    wall_time: float = 0.0

    def to_dict(self, include_timing=False):
        out = asdict(self)
        if not include_timing:
            out.pop("wall_time")
        return out


def iterate(state: OptimizerState, config: OptimizerConfig, problem, ref_point=None):
    """Propose, evaluate the problem's noisy objectives there, and append.

    Returns ``(new_state, x_unit, record)``.
    """
    t = state.iteration
    prop = propose(state, config, ref_point=ref_point)
    x_raw = problem.domain.from_unit(prop.x_unit)
    obs = problem.observe(x_raw, seed=_seed(config, _LOOP, t, _NOISE))
    record = IterationRecord(
        iteration=t + 1,
        x_unit=prop.x_unit.tolist(),
        x_raw=np.asarray(x_raw).tolist(),
        observation=obs.values.tolist(),
        noise_free=obs.noise_free.tolist(),
        ehvi=prop.ehvi,
        weighted_ehvi=prop.weighted_ehvi,
        k_used=prop.k_used,
        omega=prop.diagnostics["omega"],
        delta2=prop.diagnostics["delta2"],
    )
    return state.append(prop.x_unit, obs.values), prop.x_unit, record


@dataclass
class ExperimentRecord:
    """Full trace of one run."""

    problem: str
    noise_fraction: float
    config: dict
    ref_point: list
    initial_x_unit: list
    initial_x_raw: list
    initial_observations: list
    initial_noise_free: list
    iterations: list = field(default_factory=list)
    frontier: list = field(default_factory=list)
    frontier_indices: list = field(default_factory=list)
    stopped_early: bool = False

    @property
    def ehvi_curve(self) -> np.ndarray:
        return np.array([it.ehvi for it in self.iterations], dtype=float)

    @property
    def weighted_curve(self) -> np.ndarray:
        return np.array([it.weighted_ehvi for it in self.iterations], dtype=float)

    @property
    def n_evaluations(self) -> int:
        return len(self.initial_x_unit) + len(self.iterations)

    @property
    def wall_times(self) -> np.ndarray:
        return np.array([it.wall_time for it in self.iterations], dtype=float)

    def all_noise_free(self) -> np.ndarray:
        rows = list(self.initial_noise_free) + [it.noise_free for it in self.iterations]
        return np.asarray(rows, dtype=float)

    def all_observations(self) -> np.ndarray:
        rows = list(self.initial_observations) + [it.observation for it in self.iterations]
        return np.asarray(rows, dtype=float)

    def to_dict(self, include_timing=False):
        out = {k: v for k, v in asdict(self).items() if k != "iterations"}
        out["iterations"] = [it.to_dict(include_timing) for it in self.iterations]
        return out


def initial_state(config: OptimizerConfig, problem):
    """Evaluate the Latin hypercube design; returns ``(state, noise_free)``."""
    x0 = init_design(config.d, config.n_init, _seed(config, _INIT, 0))
    ys, clean = [], []
    for i, u in enumerate(x0):
        obs = problem.observe(problem.domain.from_unit(u), seed=_seed(config, _INIT, 1, i))
        ys.append(obs.values)
        clean.append(obs.noise_free)
    return OptimizerState(x0, np.asarray(ys)), np.asarray(clean)


def run(config: OptimizerConfig, problem) -> ExperimentRecord:
    """Run until the budget is spent or the best weighted EHVI drops below
    ``config.stop_epsilon``.

    Problem-level noise knowledge fills in ``noise_sd`` and the reference
    point when the config leaves them unset.
    """
    if config.noise_sd is None and config.priors is None:
        config = replace(config, noise_sd=tuple(float(v) for v in problem.noise_sd))
    if config.ref_point is None:
        config = replace(config, ref_point=tuple(float(v) for v in problem.ref_point))
    state, clean0 = initial_state(config, problem)
    record = ExperimentRecord(
        problem=problem.name,
        noise_fraction=float(problem.noise_fraction),
        config=config.to_dict(),
        ref_point=list(config.ref_point),
        initial_x_unit=state.inputs.tolist(),
        initial_x_raw=problem.domain.from_unit(state.inputs).tolist(),
        initial_observations=state.outputs.tolist(),
        initial_noise_free=clean0.tolist(),
    )
    start = time.perf_counter()
    while state.n < config.budget:
        state, _, it = iterate(state, config, problem)
        it.wall_time = time.perf_counter() - start
        record.iterations.append(it)
        if config.stop_epsilon is not None and it.weighted_ehvi < config.stop_epsilon:
            record.stopped_early = state.n < config.budget
            break
    front = current_frontier(state)
    record.frontier = front.points.tolist()
    record.frontier_indices = front.source_indices.tolist()
    return record


class AskTellOptimizer:
    """Ask/tell wrapper for objectives evaluated outside this package.

    Inputs passed in and out are in the raw units of ``domain``.

    Examples
    --------
    >>> opt = AskTellOptimizer(config, domain, ref_point=[250.0, 15.0])
    >>> for x in opt.initial_design():
    ...     opt.tell(x, evaluate(x))
    >>> x = opt.propose()
    >>> opt.tell(x, evaluate(x))
    """

    def __init__(self, config: OptimizerConfig, domain: DesignDomain | None = None,
                 ref_point=None):
        self.config = config
        self.domain = domain or DesignDomain.unit(config.d)
        if self.domain.d != config.d:
            raise ValueError("domain dimension does not match config.d")
        self.ref_point = np.asarray(ref_point if ref_point is not None else config.ref_point,
                                    dtype=float)
        self._inputs = np.empty((0, config.d))
        self._outputs = np.empty((0, config.k_objectives))
        self._proposals = 0
        self.last_proposal = None

    @property
    def state(self) -> OptimizerState:
        return OptimizerState(self._inputs, self._outputs, self._proposals)

    def initial_design(self) -> np.ndarray:
        u = init_design(self.config.d, self.config.n_init, _seed(self.config, _INIT, 0))
        return self.domain.from_unit(u)

    def propose(self) -> np.ndarray:
        if self._inputs.shape[0] < 2:
            raise RuntimeError("tell at least two observations before proposing")
        prop = propose(self.state, self.config, ref_point=self.ref_point)
        self._proposals += 1
        self.last_proposal = prop
        return self.domain.from_unit(prop.x_unit)

    def tell(self, x, y) -> None:
        u = self.domain.to_unit(np.asarray(x, dtype=float).reshape(1, -1))
        y = np.asarray(y, dtype=float).reshape(1, -1)
        if y.shape[1] != self.config.k_objectives:
            raise ValueError("observation has the wrong number of objectives")
        self._inputs = np.vstack([self._inputs, u])
        self._outputs = np.vstack([self._outputs, y])

    def frontier(self) -> ParetoSet:
        return pareto_front(self._outputs)
