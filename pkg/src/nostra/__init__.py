"""Trust-region multi-objective Bayesian optimization for noisy, sparse data."""

from .domain import DesignDomain
from .exceptions import (
    ClusteringError,
    ConditioningError,
    DimensionError,
    DomainError,
    FitError,
    IterationError,
    NostraError,
    ReferencePointError,
)
from .gp import GPHyperParams, GPModel, HyperPrior, TrainingSet, fit_map, predict
from .optimizer import AskTellOptimizer, ExperimentRecord, OptimizerConfig, init_design, run
from .pareto import ParetoSet, dominates, ehvi_mc, ehvi_mc_batch, hv_2d, hvi, pareto_front
from .problems import TestProblem, get_problem
from .trust import (
    build_pool,
    cluster_weights,
    elbow_select_k,
    kmeans_probs,
    pareto_probabilities,
    wcss_curve,
    weighted_scores,
)

__version__ = "0.1.0"

__all__ = [
    "AskTellOptimizer",
    "ClusteringError",
    "ConditioningError",
    "DesignDomain",
    "DimensionError",
    "DomainError",
    "ExperimentRecord",
    "FitError",
    "GPHyperParams",
    "GPModel",
    "HyperPrior",
    "IterationError",
    "NostraError",
    "OptimizerConfig",
    "ParetoSet",
    "ReferencePointError",
    "TestProblem",
    "TrainingSet",
    "build_pool",
    "cluster_weights",
    "dominates",
    "ehvi_mc",
    "ehvi_mc_batch",
    "elbow_select_k",
    "fit_map",
    "get_problem",
    "hv_2d",
    "hvi",
    "init_design",
    "kmeans_probs",
    "pareto_front",
    "pareto_probabilities",
    "predict",
    "run",
    "wcss_curve",
    "weighted_scores",
]
