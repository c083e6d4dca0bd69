import math

import numpy as np
import pytest

from nostra.exceptions import ConditioningError, DimensionError
from nostra.gp import (
    JITTER_START,
    GPHyperParams,
    GPModel,
    HyperPrior,
    TrainingSet,
    build_R_delta,
    cholesky_with_jitter,
    correlation,
    correlation_matrix,
    fit_map,
    neg_log_likelihood,
    neg_log_posterior,
    neg_log_posterior_and_grad,
    predict,
    sample_marginals,
    sigma2_closed_form,
)


def dense_nll(x, y, omega, delta2):
    """Direct evaluation with an explicit determinant and inverse.

    The diagonal carries the same fixed jitter the factorization adds.
    """
    n = len(y)
    r = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            r[i, j] = math.exp(-(10**omega) * sum((a - b) ** 2 for a, b in zip(x[i], x[j])))
    r += (delta2 + JITTER_START) * np.eye(n)
    rinv = np.linalg.inv(r)
    s2 = y @ rinv @ y / n
    return 0.5 * n * math.log(s2) + 0.5 * math.log(np.linalg.det(r)) + y @ rinv @ y / (2 * s2)


class TestCorrelation:
    def test_zero_distance(self):
        assert correlation([0.3, 0.7], [0.3, 0.7], 4.2) == 1.0

    def test_unit_distance_unit_scale(self):
        assert correlation([0.0, 0.0], [1.0, 0.0], 0.0) == pytest.approx(math.exp(-1))
        assert correlation([0.0], [1.0], 0.0) == pytest.approx(0.367879, abs=1e-6)

    def test_hand_value(self):
        assert correlation([0, 0], [0.5, 0.5], 1.0) == pytest.approx(math.exp(-5), rel=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            correlation([0, 0], [0, 0, 0], 0.0)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a, b = rng.random(3), rng.random(3)
            w = rng.uniform(-3, 1)
            c = correlation(a, b, w)
            assert c == correlation(b, a, w)
            assert 0.0 < c < 1.0


class TestRDelta:
    def test_single_point(self):
        t = TrainingSet([[0.2, 0.4]], [1.0])
        r = build_R_delta(t, GPHyperParams(0.0, 0.3))
        np.testing.assert_array_equal(r, [[1.3]])

    def test_duplicate_inputs(self):
        t = TrainingSet([[0.5, 0.5], [0.5, 0.5]], [1.0, 2.0])
        r = build_R_delta(t, GPHyperParams(0.0, 0.1))
        np.testing.assert_allclose(r, [[1.1, 1.0], [1.0, 1.1]], rtol=1e-15)

    def test_unit_distance(self):
        t = TrainingSet([[0.0, 0.0], [1.0, 0.0]], [1.0, 2.0])
        r = build_R_delta(t, GPHyperParams(0.0, 0.0))
        e = math.exp(-1)
        np.testing.assert_allclose(r, [[1, e], [e, 1]], rtol=1e-15)

    def test_cholesky_reconstructs(self):
        rng = np.random.default_rng(1)
        t = TrainingSet(rng.random((12, 2)), rng.random(12))
        r = build_R_delta(t, GPHyperParams(0.5, 1e-8))
        chol, jitter = cholesky_with_jitter(r)
        assert np.allclose(chol @ chol.T, r, atol=1e-8, rtol=0)
        assert 1e-10 <= jitter <= 1e-6

    def test_cholesky_failure(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ConditioningError):
            cholesky_with_jitter(bad)


class TestSigma2:
    def test_scalar(self):
        t = TrainingSet([[0.0, 0.0]], [2.0])
        chol = np.array([[1.0]])
        assert sigma2_closed_form(t, chol) == 4.0

    def test_identity(self):
        t = TrainingSet([[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0])
        assert sigma2_closed_form(t, np.eye(2)) == 1.0

    def test_zero_response_rejected(self):
        t = TrainingSet([[0.0, 0.0], [1.0, 1.0]], [0.0, 0.0])
        with pytest.raises(ConditioningError):
            sigma2_closed_form(t, np.eye(2))


class TestLikelihood:
    def test_scalar_case(self):
        t = TrainingSet([[0.0, 0.0]], [2.0])
        assert neg_log_likelihood(t, 0.0, 0.0) == pytest.approx(
            0.5 * math.log(4) + 0.5, abs=1e-8)
        assert neg_log_likelihood(t, 0.0, 0.0) == pytest.approx(1.19315, abs=1e-5)

    def test_identity_case(self):
        # points far apart at a huge omega make R the identity
        t = TrainingSet([[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0])
        assert neg_log_likelihood(t, 10.0, 0.0) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("c", [0.5, 3.0, 17.0])
    def test_output_scaling_shift(self, c):
        rng = np.random.default_rng(2)
        x, y = rng.random((7, 2)), rng.standard_normal(7)
        a = neg_log_likelihood(TrainingSet(x, y), 0.7, 0.01)
        b = neg_log_likelihood(TrainingSet(x, c * y), 0.7, 0.01)
        assert b - a == pytest.approx(7 * math.log(c), rel=1e-10)

    def test_matches_dense_evaluation(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            n = rng.integers(2, 11)
            x, y = rng.random((n, 2)), rng.standard_normal(n)
            omega, delta2 = rng.uniform(-1, 1.5), 10 ** rng.uniform(-3, 0)
            ours = neg_log_likelihood(TrainingSet(x, y), omega, delta2)
            ref = dense_nll(x.tolist(), y, omega, delta2)
            assert ours == pytest.approx(ref, rel=1e-8)


class TestPosterior:
    def setup_method(self):
        rng = np.random.default_rng(4)
        self.train = TrainingSet(rng.random((6, 2)), rng.standard_normal(6))

    def test_flat_prior_limit(self):
        base = neg_log_likelihood(self.train, 0.3, 0.05)
        wide = HyperPrior(0.0, 1e8, -2.0, 1e8)
        assert neg_log_posterior(self.train, 0.3, 0.05, wide) == pytest.approx(base, abs=1e-12)

    def test_at_prior_mode(self):
        prior = HyperPrior(0.4, 1.0, -1.5, 0.5)
        t = TrainingSet([[0.1, 0.1]], [1.3])
        d2 = 10**-1.5
        assert neg_log_posterior(t, 0.4, d2, prior) == pytest.approx(
            neg_log_likelihood(t, 0.4, d2), abs=1e-12)

    def test_one_sd_adds_half(self):
        prior = HyperPrior(0.0, 2.0, -2.0, 0.5)
        assert prior.penalty(2.0, -2.0) - prior.penalty(0.0, -2.0) == pytest.approx(0.5)
        a = neg_log_posterior(self.train, 2.0, 0.01, prior) - neg_log_likelihood(self.train, 2.0, 0.01)
        assert a == pytest.approx(0.5, abs=1e-9)

    @pytest.mark.parametrize("prior", [None, HyperPrior(0.5, 1.5, -1.0, 0.5)])
    def test_gradient_matches_central_differences(self, prior):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = rng.integers(3, 12)
            t = TrainingSet(rng.random((n, 2)), rng.standard_normal(n))
            w, s = rng.uniform(-1, 2), rng.uniform(-4, 0)
            _, g = neg_log_posterior_and_grad(t, w, s, prior)
            h = 1e-5
            fd = np.array([
                (neg_log_posterior_and_grad(t, w + h, s, prior)[0]
                 - neg_log_posterior_and_grad(t, w - h, s, prior)[0]) / (2 * h),
                (neg_log_posterior_and_grad(t, w, s + h, prior)[0]
                 - neg_log_posterior_and_grad(t, w, s - h, prior)[0]) / (2 * h),
            ])
            np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-7)


def _gp_draw(n, omega, seed, d=2):
    rng = np.random.default_rng(seed)
    x = rng.random((n, d))
    k = correlation_matrix(x, x, omega) + 1e-10 * np.eye(n)
    y = np.linalg.cholesky(k) @ rng.standard_normal(n)
    return x, y


class TestFit:
    def test_recovers_roughness_under_tight_prior(self):
        x, y = _gp_draw(15, 0.0, seed=6)
        prior = HyperPrior(0.0, 0.5, -6.0, 0.5)
        model = fit_map(TrainingSet(x, y), prior=prior, restarts=4, seed=0)
        assert abs(model.params.omega) < 2 * prior.omega_sd
        assert model.params.in_domain

    def test_deterministic(self):
        x, y = _gp_draw(8, 0.5, seed=7)
        t = TrainingSet(x, y + 0.01 * np.arange(8), noise_sd=0.05)
        a = fit_map(t, seed=11)
        b = fit_map(t, seed=11)
        assert a.params == b.params

    def test_best_over_restarts(self):
        x, y = _gp_draw(10, 0.8, seed=8)
        model = fit_map(TrainingSet(x, y), prior=HyperPrior(), restarts=5, seed=1)
        values = [r.value for r in model.restarts if r.success]
        assert len(model.restarts) == 6
        best = min(values)
        assert neg_log_posterior(
            TrainingSet(x, (y - model.y_mean) / model.y_scale),
            model.params.omega, model.params.delta2, model.prior) == pytest.approx(best, abs=1e-9)

    def test_objective_descends_along_trace(self):
        x, y = _gp_draw(10, 0.3, seed=9)
        model = fit_map(TrainingSet(x, y + 0.1), prior=HyperPrior(), restarts=3, seed=2,
                        record_trace=True)
        for r in model.restarts:
            trace = np.array(r.trace)
            assert trace.size >= 2
            assert trace[-1] < trace[0]
            assert np.all(np.diff(trace) <= 1e-9)

    def test_restarts_do_not_stall_at_domain_edges(self):
        # starts near the nugget and roughness edges must still reach the interior mode
        rng = np.random.default_rng(16)
        x = rng.random((5, 2))
        y = np.sin(4 * x[:, 0]) + 0.05 * rng.standard_normal(5)
        model = fit_map(TrainingSet(x, y), prior=HyperPrior(0.0, 2.0, -1.4, 0.5),
                        restarts=12, seed=3)
        ends = np.array([(r.omega, r.log10_delta2) for r in model.restarts])
        assert np.ptp(ends, axis=0).max() < 1e-2

    def test_single_sample_allowed(self):
        model = fit_map(TrainingSet([[0.5, 0.5]], [3.0]), prior=HyperPrior(), seed=0)
        mean, var = predict(model, [0.5, 0.5])
        assert math.isfinite(mean) and var >= 0

    def test_auto_prior_uses_noise(self):
        x, y = _gp_draw(6, 0.0, seed=10)
        model = fit_map(TrainingSet(x, y, noise_sd=0.1), seed=0)
        expected = HyperPrior.noise_informed(0.1, model.y_scale)
        assert model.prior == expected
        assert fit_map(TrainingSet(x, y), seed=0).prior is None


class TestPredict:
    def test_interpolates_without_nugget(self):
        rng = np.random.default_rng(12)
        x = rng.random((8, 2))
        y = np.sin(5 * x[:, 0]) + x[:, 1]
        model = GPModel.from_params(TrainingSet(x, y), 1.0, 0.0)
        mean, var = predict(model, x)
        np.testing.assert_allclose((mean - model.y_mean) / model.y_scale,
                                   model.standardized_outputs, atol=1e-6)
        assert np.all(var <= 1e-6 * model.params.sigma2 * model.y_scale**2)

    def test_reverts_to_prior_far_away(self):
        x = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]])
        model = GPModel.from_params(TrainingSet(x, [1.0, 2.0, 4.0]), 2.0, 0.01)
        mean, var = predict(model, [50.0, 50.0])
        assert mean == pytest.approx(model.y_mean, abs=1e-12)
        assert var == pytest.approx(model.params.sigma2 * model.y_scale**2, rel=1e-12)

    def test_symmetric_midpoint(self):
        x = np.array([[0.2, 0.5], [0.8, 0.5]])
        model = GPModel.from_params(TrainingSet(x, [1.0, 3.0]), 0.5, 0.01,
                                    standardize=False)
        mean, _ = predict(model, [0.5, 0.5])
        # symmetric kernel solve: equal weights on both outputs
        w = correlation([0.5, 0.5], x[0], 0.5) / (
            1.01 + JITTER_START + correlation(x[0], x[1], 0.5))
        assert mean == pytest.approx(w * 4.0, rel=1e-12)
        model2 = GPModel.from_params(TrainingSet(x, [1.0, 3.0]), 0.5, 0.01)
        assert predict(model2, [0.5, 0.5])[0] == pytest.approx(2.0, abs=1e-12)

    def test_variance_bounds(self):
        rng = np.random.default_rng(13)
        x, y = rng.random((10, 2)), rng.standard_normal(10)
        model = fit_map(TrainingSet(x, y, noise_sd=0.3), seed=0)
        _, var = predict(model, rng.uniform(-1, 2, (200, 2)), noisy=True)
        p = model.params
        cap = (p.sigma2 * (1 + p.delta2) + 1e-8) * model.y_scale**2
        assert np.all(var >= 0) and np.all(var <= cap)

    def test_destandardization_round_trip(self):
        rng = np.random.default_rng(14)
        x = rng.random((9, 2))
        y = 40.0 + 7.0 * rng.standard_normal(9)
        raw = GPModel.from_params(TrainingSet(x, y), 0.6, 0.02)
        ys = (y - raw.y_mean) / raw.y_scale
        std = GPModel.from_params(TrainingSet(x, ys), 0.6, 0.02, standardize=False)
        xq = rng.random((30, 2))
        m1, v1 = predict(raw, xq)
        m2, v2 = predict(std, xq)
        np.testing.assert_allclose(m1, m2 * raw.y_scale + raw.y_mean, rtol=0, atol=1e-10)
        np.testing.assert_allclose(v1, v2 * raw.y_scale**2, rtol=0, atol=1e-10)

    def test_noisy_adds_nugget(self):
        x = np.array([[0.1, 0.1], [0.9, 0.9]])
        model = GPModel.from_params(TrainingSet(x, [0.0, 1.0]), 1.0, 0.2)
        _, latent = predict(model, [0.4, 0.6])
        _, noisy = predict(model, [0.4, 0.6], noisy=True)
        expected = model.params.sigma2 * model.params.delta2 * model.y_scale**2
        assert noisy - latent == pytest.approx(expected, rel=1e-12)


class TestSampleMarginals:
    def setup_method(self):
        rng = np.random.default_rng(15)
        x = rng.random((6, 2))
        self.model = GPModel.from_params(TrainingSet(x, rng.standard_normal(6)), 0.5, 0.05)

    def test_zero_variance_rows_equal_mean(self):
        x = np.array([[0.2, 0.2], [0.7, 0.3]])
        model = GPModel.from_params(TrainingSet(x, [1.0, 2.0]), 1.0, 0.0)
        draws = sample_marginals(model, x, 5, seed=0)
        mean, _ = predict(model, x)
        np.testing.assert_allclose(draws, np.tile(mean, (5, 1)), atol=1e-4)

    def test_sample_mean_clt(self):
        xq = np.array([[0.5, 0.5]])
        mu, var = predict(self.model, xq)
        draws = sample_marginals(self.model, xq, 100_000, seed=1)
        assert abs(draws.mean() - mu[0]) < 4 * math.sqrt(var[0] / 100_000)

    def test_seeded(self):
        xq = np.array([[0.1, 0.9], [0.9, 0.1]])
        a = sample_marginals(self.model, xq, 1, seed=42)
        b = sample_marginals(self.model, xq, 1, seed=42)
        assert a.shape == (1, 2)
        np.testing.assert_array_equal(a, b)
