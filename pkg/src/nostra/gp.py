"""Gaussian-process surrogate with a nugget-augmented isotropic kernel.

The correlation between two inputs is

    R(x, x') = exp(-10**omega * ||x - x'||^2)

and observation noise enters as a nugget on the diagonal, ``R_delta = R +
delta2 * I``. The process variance ``sigma2`` is profiled out in closed form,
leaving ``(omega, log10(delta2))`` to be estimated, either by maximum
likelihood or by maximum a posteriori under independent normal priors.

All fitting happens on standardized outputs (zero mean, unit variance); the
model de-standardizes its predictions back to raw units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf, dpotri, dpotrs
from scipy.optimize import minimize

from .exceptions import ConditioningError, DimensionError, FitError

__all__ = [
    "OMEGA_BOUNDS",
    "LOG10_DELTA2_BOUNDS",
    "TrainingSet",
    "GPHyperParams",
    "HyperPrior",
    "GPModel",
    "correlation",
    "correlation_matrix",
    "build_R_delta",
    "cholesky_with_jitter",
    "sigma2_closed_form",
    "neg_log_likelihood",
    "neg_log_posterior",
    "neg_log_posterior_and_grad",
    "fit_map",
    "predict",
    "sample_marginals",
    "draw_marginals",
]

OMEGA_BOUNDS = (-10.0, 10.0)
LOG10_DELTA2_BOUNDS = (-8.0, 1.0)

JITTER_START = 1e-10
JITTER_MAX = 1e-6

_LN10 = math.log(10.0)
# the search stays this far inside the open hyperparameter domains
_EDGE = 1e-9


@dataclass(frozen=True)
class TrainingSet:
    """Observed inputs and outputs for a single objective.

    Parameters
    ----------
    inputs : array_like, shape (n, d)
        Design points in the unit box.
    outputs : array_like, shape (n,)
        Observed responses in raw units.
    noise_sd : float, optional
        Known observation-noise standard deviation in raw units. Used to
        build a noise-informed prior when none is given explicitly.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    noise_sd: float | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.outputs, dtype=float).reshape(-1)
        if x.shape[0] < 1:
            raise ValueError("a training set needs at least one sample")
        if x.shape[0] != y.shape[0]:
            raise DimensionError(
                f"{x.shape[0]} inputs but {y.shape[0]} outputs"
            )
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("training inputs and outputs must be finite")
        if self.noise_sd is not None and not self.noise_sd >= 0:
            raise ValueError("noise_sd must be non-negative")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class GPHyperParams:
    """Fitted hyperparameters.

    ``delta2`` may be zero for an interpolating model built by hand; fitted
    models always have ``delta2`` inside ``LOG10_DELTA2_BOUNDS``.
    """

    omega: float
    delta2: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.omega):
            raise ValueError("omega must be finite")
        if not (self.delta2 >= 0 and math.isfinite(self.delta2)):
            raise ValueError("delta2 must be finite and non-negative")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError("sigma2 must be finite and positive")

    @property
    def log10_delta2(self) -> float:
        return math.log10(self.delta2) if self.delta2 > 0 else -math.inf

    @property
    def in_domain(self) -> bool:
        lo, hi = LOG10_DELTA2_BOUNDS
        return (
            OMEGA_BOUNDS[0] < self.omega < OMEGA_BOUNDS[1]
            and 10.0**lo < self.delta2 < 10.0**hi
        )


@dataclass(frozen=True)
class HyperPrior:
    """Independent normal priors on ``omega`` and on ``log10(delta2)``."""

    omega_mean: float = 0.0
    omega_sd: float = 2.0
    delta_mean: float = -2.0
    delta_sd: float = 0.5

    def __post_init__(self):
        for name in ("omega_sd", "delta_sd"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and positive")
        for name in ("omega_mean", "delta_mean"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def noise_informed(cls, noise_sd, y_scale, omega_mean=0.0, omega_sd=2.0,
                       delta_sd=0.5):
        """Prior whose nugget mode matches a known noise level.

        The nugget lives in standardized units, so a raw noise standard
        deviation ``noise_sd`` maps to ``(noise_sd / y_scale)**2``. Zero noise
        is floored at the lower edge of the nugget domain.
        """
        lo, hi = LOG10_DELTA2_BOUNDS
        ratio2 = (float(noise_sd) / float(y_scale)) ** 2
        mean = math.log10(ratio2) if ratio2 > 0 else lo
        mean = min(max(mean, lo), hi)
        return cls(omega_mean, omega_sd, mean, delta_sd)

    def penalty(self, omega, log10_delta2):
        """Negative log prior density without its normalizing constant."""
        zw = (omega - self.omega_mean) / self.omega_sd
        zd = (log10_delta2 - self.delta_mean) / self.delta_sd
        return 0.5 * (zw * zw + zd * zd)

    def penalty_grad(self, omega, log10_delta2):
        return np.array([
            (omega - self.omega_mean) / self.omega_sd**2,
            (log10_delta2 - self.delta_mean) / self.delta_sd**2,
        ])


def _as_vector(x):
    return np.asarray(x, dtype=float).reshape(-1)


def _sq_distances(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def correlation(x, x_prime, omega):
    """Squared-exponential correlation between two points."""
    x = _as_vector(x)
    x_prime = _as_vector(x_prime)
    if x.shape != x_prime.shape:
        raise DimensionError(
            f"dimension mismatch: {x.shape[0]} vs {x_prime.shape[0]}"
        )
    if not math.isfinite(omega):
        raise ValueError("omega must be finite")
    dist2 = float(np.dot(x - x_prime, x - x_prime))
    return math.exp(-(10.0**omega) * dist2)


def correlation_matrix(a, b, omega):
    """Correlation between every row of ``a`` and every row of ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}"
        )
    return np.exp(-(10.0**omega) * _sq_distances(a, b))


def build_R_delta(train: TrainingSet, params: GPHyperParams) -> np.ndarray:
    """Nugget-augmented correlation matrix of the training inputs.

    Jitter is not included here; it is added by :func:`cholesky_with_jitter`.
    """
    r = correlation_matrix(train.inputs, train.inputs, params.omega)
    r[np.diag_indices_from(r)] = 1.0 + params.delta2
    return r


def cholesky_with_jitter(matrix):
    """Lower Cholesky factor after adding escalating diagonal jitter.

    Returns ``(chol, jitter)``. Jitter starts at 1e-10 and grows tenfold up
    to 1e-6; beyond that a :class:`ConditioningError` is raised.
    """
    matrix = np.asarray(matrix, dtype=float)
    eye = np.eye(matrix.shape[0])
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(matrix + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise ConditioningError(
        f"Cholesky failed with diagonal jitter up to {JITTER_MAX:g}"
    )


def _quad_form(chol, y):
    alpha = cho_solve((chol, True), y, check_finite=False)
    return float(y @ alpha), alpha


def sigma2_closed_form(train: TrainingSet, chol) -> float:
    """Profiled process variance ``y^T R_delta^{-1} y / n``.

    ``chol`` is the lower Cholesky factor of ``R_delta``.
    """
    q, _ = _quad_form(np.asarray(chol, dtype=float), train.outputs)
    sigma2 = q / train.n
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise ConditioningError(
            f"non-positive profiled variance {sigma2!r} (degenerate outputs?)"
        )
    return sigma2


def _factor(rd):
    # in-place escalation of the jitter policy on a private copy
    n = rd.shape[0]
    diag = np.diag_indices(n)
    base = rd[diag].copy()
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        rd[diag] = base + jitter
        chol, info = dpotrf(rd, lower=1, clean=1, overwrite_a=0)
        if info == 0:
            return chol
        jitter *= 10.0
    raise ConditioningError(
        f"Cholesky failed with diagonal jitter up to {JITTER_MAX:g}"
    )


def _nll_terms(dist2, y, omega, log10_delta2, want_grad):
    n = y.shape[0]
    scale = 10.0**omega
    delta2 = 10.0**log10_delta2
    r = np.exp(-scale * dist2)
    rd = r.copy()
    rd[np.diag_indices(n)] += delta2
    chol = _factor(rd)
    alpha, _ = dpotrs(chol, y, lower=1)
    sigma2 = float(y @ alpha) / n
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        raise ConditioningError(f"non-positive profiled variance {sigma2!r}")
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    value = 0.5 * n * math.log(sigma2) + 0.5 * logdet + 0.5 * n
    if not want_grad:
        return value, None
    # chol has a zeroed upper triangle, so dpotri leaves only the lower half
    low, _ = dpotri(chol, lower=1)
    d_omega = (-_LN10 * scale) * dist2 * r
    # d_omega is symmetric with a zero diagonal
    tr_omega = 2.0 * np.vdot(low, d_omega)
    g_omega = -(alpha @ d_omega @ alpha) / (2.0 * sigma2) + 0.5 * tr_omega
    d_delta = _LN10 * delta2
    g_delta = d_delta * (-(alpha @ alpha) / (2.0 * sigma2) + 0.5 * np.trace(low))
    return value, np.array([g_omega, g_delta])


def neg_log_likelihood(train: TrainingSet, omega: float, delta2: float) -> float:
    """Concentrated negative log-likelihood with ``sigma2`` profiled out.

    Evaluates ``n/2 log(s2) + 1/2 log det(R_delta) + y^T R_delta^{-1} y /
    (2 s2)`` with ``s2`` the closed-form variance, on the outputs exactly as
    stored in ``train`` (no standardization).
    """
    if delta2 < 0:
        raise ValueError("delta2 must be non-negative")
    dist2 = _sq_distances(train.inputs, train.inputs)
    log10_delta2 = math.log10(delta2) if delta2 > 0 else -math.inf
    value, _ = _nll_terms(dist2, train.outputs, omega, log10_delta2, False)
    return value


def neg_log_posterior(train: TrainingSet, omega: float, delta2: float,
                      prior: HyperPrior | None) -> float:
    """Negative log-likelihood plus the negative log prior (constants dropped)."""
    value = neg_log_likelihood(train, omega, delta2)
    if prior is not None:
        value += prior.penalty(omega, math.log10(delta2))
    return value


def neg_log_posterior_and_grad(train: TrainingSet, omega: float,
                               log10_delta2: float,
                               prior: HyperPrior | None = None):
    """Objective and its gradient with respect to ``(omega, log10(delta2))``."""
    dist2 = _sq_distances(train.inputs, train.inputs)
    return _objective(dist2, train.outputs, prior, omega, log10_delta2)


def _objective(dist2, y, prior, omega, log10_delta2):
    value, grad = _nll_terms(dist2, y, omega, log10_delta2, True)
    if prior is not None:
        value += prior.penalty(omega, log10_delta2)
        grad = grad + prior.penalty_grad(omega, log10_delta2)
    return value, grad


def _standardize(y):
    if y.shape[0] > 1:
        mean = float(np.mean(y))
        scale = float(np.std(y))
        if scale > 1e-12 * max(1.0, abs(mean)):
            return mean, scale
    # single sample or constant response: keep the sign, unit magnitude
    return 0.0, max(float(np.max(np.abs(y))), 1.0)


@dataclass(frozen=True)
class RestartResult:
    start: tuple
    omega: float
    log10_delta2: float
    value: float
    success: bool
    message: str
    n_iter: int = 0
    trace: tuple = ()


@dataclass(frozen=True, eq=False)
class GPModel:
    """A fitted surrogate with its cached factorization.

    Instances are immutable and safe to share between threads.
    """

    train: TrainingSet
    params: GPHyperParams
    chol: np.ndarray
    alpha: np.ndarray
    y_mean: float
    y_scale: float
    jitter: float
    prior: HyperPrior | None = None
    restarts: tuple = field(default=(), repr=False)

    @classmethod
    def from_params(cls, train: TrainingSet, omega: float, delta2: float,
                    standardize: bool = True, prior: HyperPrior | None = None,
                    restarts: tuple = ()):
        """Build a model at fixed ``(omega, delta2)``; ``sigma2`` is profiled."""
        if standardize:
            y_mean, y_scale = _standardize(train.outputs)
        else:
            y_mean, y_scale = 0.0, 1.0
        ys = (train.outputs - y_mean) / y_scale
        std_train = TrainingSet(train.inputs, ys)
        rd = build_R_delta(std_train, GPHyperParams(omega, delta2))
        chol, jitter = cholesky_with_jitter(rd)
        sigma2 = sigma2_closed_form(std_train, chol)
        alpha = cho_solve((chol, True), ys, check_finite=False)
        return cls(
            train=train,
            params=GPHyperParams(omega, delta2, sigma2),
            chol=chol,
            alpha=alpha,
            y_mean=y_mean,
            y_scale=y_scale,
            jitter=jitter,
            prior=prior,
            restarts=tuple(restarts),
        )

    @property
    def standardized_outputs(self) -> np.ndarray:
        return (self.train.outputs - self.y_mean) / self.y_scale

    def predict(self, x, noisy: bool = False):
        return predict(self, x, noisy=noisy)


def fit_map(train: TrainingSet, prior="auto", restarts: int = 8, seed=None,
            standardize: bool = True, record_trace: bool = False) -> GPModel:
    """Fit ``(omega, delta2)`` by multi-start L-BFGS on the log posterior.

    Parameters
    ----------
    train : TrainingSet
        Raw training data.
    prior : HyperPrior, None or "auto"
        ``None`` gives a likelihood-only fit. ``"auto"`` builds a
        noise-informed prior from ``train.noise_sd`` when it is known and
        falls back to likelihood-only otherwise.
    restarts : int
        Number of random starts, drawn uniformly over the hyperparameter box.
        When a prior is used, one more start is placed at the prior means.
    seed : int or SeedSequence, optional
        Each restart uses its own child seed, so results do not depend on
        evaluation order.
    record_trace : bool
        Keep the objective value after every L-BFGS iteration in the
        per-restart diagnostics.

    Returns
    -------
    GPModel
    """
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    if standardize:
        y_mean, y_scale = _standardize(train.outputs)
    else:
        y_mean, y_scale = 0.0, 1.0
    ys = (train.outputs - y_mean) / y_scale
    if isinstance(prior, str):
        if prior != "auto":
            raise ValueError(f"unknown prior specification {prior!r}")
        prior = (
            HyperPrior.noise_informed(train.noise_sd, y_scale)
            if train.noise_sd is not None else None
        )

    dist2 = _sq_distances(train.inputs, train.inputs)

    def fun(theta):
        return _objective(dist2, ys, prior, theta[0], theta[1])

    def safe_fun(theta):
        try:
            return fun(theta)
        except ConditioningError:
            return 1e25, np.zeros(2)

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    starts = []
    if prior is not None:
        starts.append((prior.omega_mean, prior.delta_mean))
    for child in ss.spawn(restarts):
        rng = np.random.default_rng(child)
        starts.append((
            rng.uniform(*OMEGA_BOUNDS),
            rng.uniform(*LOG10_DELTA2_BOUNDS),
        ))

    # the domains are open intervals; keep the search a hair inside them
    box = [(lo + _EDGE, hi - _EDGE) for lo, hi in (OMEGA_BOUNDS, LOG10_DELTA2_BOUNDS)]
    results = []
    for start in starts:
        theta0 = np.clip(np.array(start, dtype=float), [b[0] for b in box],
                         [b[1] for b in box])
        trace = []
        try:
            v0, _ = fun(theta0)
        except ConditioningError as exc:
            results.append(RestartResult(start, math.nan, math.nan, math.inf,
                                         False, f"start failed: {exc}"))
            continue
        if record_trace:
            trace.append(v0)
        callback = (lambda th: trace.append(safe_fun(th)[0])) if record_trace else None
        res = minimize(safe_fun, theta0, jac=True, method="L-BFGS-B",
                       bounds=box, callback=callback,
                       options={"maxiter": 500, "ftol": 1e-14, "gtol": 1e-9})
        omega, logd = float(res.x[0]), float(res.x[1])
        try:
            value, _ = fun(res.x)
            ok = True
        except ConditioningError:
            value, ok = math.inf, False
        results.append(RestartResult(
            start, omega, logd, value, ok, str(res.message), int(res.nit),
            tuple(trace),
        ))

    finite = [r for r in results if r.success and math.isfinite(r.value)]
    if not finite:
        raise FitError("all hyperparameter restarts failed",
                       [f"{r.start}: {r.message}" for r in results])
    best = min(finite, key=lambda r: r.value)
    return _model_with_fallback(train, best, finite, standardize, prior,
                                tuple(results))


def _model_with_fallback(train, best, finite, standardize, prior, results):
    # the chosen optimum can still fail the final factorization in rare cases
    for cand in [best] + sorted(finite, key=lambda r: r.value):
        try:
            return GPModel.from_params(
                train, cand.omega, 10.0**cand.log10_delta2,
                standardize=standardize, prior=prior, restarts=results,
            )
        except ConditioningError:
            continue
    raise FitError("no restart produced a usable factorization",
                   [f"{r.start}: {r.message}" for r in results])


def predict(model: GPModel, x, noisy: bool = False):
    """Posterior predictive mean and variance in raw output units.

    The variance is that of the latent function unless ``noisy`` is set, in
    which case the nugget variance ``delta2 * sigma2`` is added. A single
    point gives scalars, a ``(m, d)`` array gives arrays of length ``m``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    if xs.shape[1] != model.train.d:
        raise DimensionError(
            f"model has d={model.train.d}, got points with d={xs.shape[1]}"
        )
    p = model.params
    cross = correlation_matrix(xs, model.train.inputs, p.omega)
    mean = cross @ model.alpha
    v = cho_solve((model.chol, True), cross.T, check_finite=False)
    reduction = np.einsum("ij,ji->i", cross, v)
    var = p.sigma2 * np.clip(1.0 - reduction, 0.0, None)
    if noisy:
        var = var + p.sigma2 * p.delta2
    mean = mean * model.y_scale + model.y_mean
    var = var * model.y_scale**2
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def draw_marginals(means, variances, n_samples, rng):
    """Independent normal draws, one row per realization."""
    means = np.asarray(means, dtype=float)
    sd = np.sqrt(np.clip(np.asarray(variances, dtype=float), 0.0, None))
    z = rng.standard_normal((int(n_samples),) + means.shape)
    return means + sd * z


def sample_marginals(model: GPModel, pool_inputs, n_samples: int, seed=None):
    """``n_samples x m`` matrix of independent posterior draws per candidate.

    Cross-covariance between candidates is ignored; each column is drawn from
    its own marginal predictive distribution.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    mean, var = predict(model, np.atleast_2d(pool_inputs))
    return draw_marginals(mean, var, n_samples, np.random.default_rng(seed))
