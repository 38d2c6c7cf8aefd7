"""Tests for simulators, likelihoods, MAP estimation and studies."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats


def _study(**overrides):
    from wcp_prior.config import StudyConfig

    payload = {
        "model": "ar1",
        "true_params": [0.9],
        "n_obs": 10,
        "replicates": 6,
        "priors": [{"name": "wcp"}, {"name": "uniform"}],
        "seed": 11,
    }
    payload.update(overrides)
    return StudyConfig.model_validate(payload)


# ---------------------------------------------------------------------------
# Simulators
# ---------------------------------------------------------------------------


class TestSimulators:
    def test_ar1_is_stationary(self, rng):
        from wcp_prior.inference import simulate_ar1

        x = simulate_ar1(0.5, 2.0, 20_000, rng)
        assert np.std(x) == pytest.approx(2.0, rel=0.05)
        assert np.corrcoef(x[1:], x[:-1])[0, 1] == pytest.approx(0.5, abs=0.03)

    def test_ar1_unit_root_has_no_innovations(self, rng):
        from wcp_prior.inference import simulate_ar1

        x = simulate_ar1(1.0, 1.0, 50, rng)
        np.testing.assert_allclose(x, x[0])

    def test_ar1_rejects_bad_parameters(self, rng):
        from wcp_prior.errors import DomainError
        from wcp_prior.inference import simulate_ar1

        with pytest.raises(DomainError):
            simulate_ar1(1.5, 1.0, 10, rng)
        with pytest.raises(DomainError):
            simulate_ar1(0.5, 0.0, 10, rng)

    def test_gpd_draws(self, rng):
        from wcp_prior.inference import simulate_gpd

        x = simulate_gpd(0.2, 1.0 / 3.0, 5000, rng)
        assert stats.kstest(x, stats.genpareto(c=1.0 / 3.0, scale=0.2).cdf).pvalue > 1e-3


# ---------------------------------------------------------------------------
# Likelihoods
# ---------------------------------------------------------------------------


class TestLikelihoods:
    def test_ar1_matches_multivariate_normal(self, rng):
        from wcp_prior.inference import ar1_loglik, simulate_ar1

        sigma, n = 0.7, 8
        x = simulate_ar1(0.6, sigma, n, rng)
        phi = np.array([-0.3, 0.2, 0.6, 0.95])
        lags = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        expected = [stats.multivariate_normal(cov=sigma**2 * p**lags).logpdf(x) for p in phi]
        np.testing.assert_allclose(ar1_loglik(x, sigma)(phi), expected, rtol=1e-10)

    def test_ar1_outside_is_minus_infinity(self):
        from wcp_prior.inference import ar1_loglik

        assert ar1_loglik(np.array([0.1, 0.2, 0.3]), 1.0)(np.array([1.0, 1.5]))[1] == -np.inf

    def test_gaussian_vectorized(self):
        from wcp_prior.inference import gaussian_loglik

        x = np.array([0.1, -0.4, 0.3])
        m, s = np.array([0.0, 0.5]), np.array([1.0, 2.0])
        expected = [stats.norm.logpdf(x, mi, si).sum() for mi, si in zip(m, s)]
        np.testing.assert_allclose(gaussian_loglik(x)(m, s), expected)
        assert gaussian_loglik(x)(0.0, -1.0) == -np.inf

    def test_gpd_vectorized(self):
        from wcp_prior.inference import gpd_loglik

        x = np.array([0.1, 0.5, 2.0])
        expected = stats.genpareto.logpdf(x, c=0.3, scale=0.4).sum()
        assert gpd_loglik(x)(0.4, 0.3) == pytest.approx(expected)


# ---------------------------------------------------------------------------
# map_estimate
# ---------------------------------------------------------------------------


class TestMapEstimate:
    def test_one_dimension(self):
        from wcp_prior.inference import map_estimate

        loglik = lambda t: -0.5 * (np.asarray(t) - 0.3) ** 2 / 0.01  # noqa: E731
        flat = lambda t: np.zeros(np.shape(t))  # noqa: E731
        estimate = map_estimate(loglik, flat, [(-1.0, 1.0)])
        assert estimate[0] == pytest.approx(0.3, abs=1e-5)

    def test_two_dimensions_with_prior(self):
        from wcp_prior.inference import map_estimate

        loglik = lambda a, b: -((np.asarray(a) - 1.0) ** 2) - (np.asarray(b) - 2.0) ** 2  # noqa: E731
        prior = lambda a, b: -((np.asarray(a) - 1.0) ** 2)  # noqa: E731
        estimate = map_estimate(loglik, prior, [(-3.0, 3.0), (-3.0, 3.0)])
        np.testing.assert_allclose(estimate, [1.0, 2.0], atol=1e-4)

    def test_boundary_maximum(self):
        from wcp_prior.inference import map_estimate

        loglik = lambda t: np.asarray(t, dtype=float)  # noqa: E731
        estimate = map_estimate(loglik, lambda t: np.zeros(np.shape(t)), [(0.0, 1.0)])
        assert estimate[0] == pytest.approx(1.0, abs=1e-4)

    def test_degenerate_posterior(self):
        from wcp_prior.errors import DegenerateDataError
        from wcp_prior.inference import map_estimate

        dead = lambda t: np.full(np.shape(t), -np.inf)  # noqa: E731
        with pytest.raises(DegenerateDataError):
            map_estimate(dead, dead, [(0.0, 1.0)])


# ---------------------------------------------------------------------------
# run_study
# ---------------------------------------------------------------------------


class TestRunStudy:
    def test_rows_and_summary(self):
        from wcp_prior.inference import run_study

        result = run_study(_study(), workers=1)
        assert len(result.rows) == 12
        assert [row["prior"] for row in result.rows[:2]] == ["wcp", "uniform"]
        assert set(result.summary) == {"wcp", "uniform"}
        assert result.summary["wcp"]["eta"] == pytest.approx(13.44, abs=0.1)
        assert result.estimates("uniform").shape == (6, 1)
        assert np.all(np.abs(result.estimates("wcp")) < 1)

    def test_workers_do_not_change_rows(self):
        from wcp_prior.inference import run_study

        serial = run_study(_study(), workers=1)
        threaded = run_study(_study(), workers=3)
        assert serial.rows == threaded.rows

    def test_common_random_numbers(self):
        from wcp_prior.inference import run_study

        base = run_study(_study(priors=[{"name": "uniform"}]), workers=1)
        both = run_study(_study(), workers=1)
        assert base.estimates("uniform").tolist() == both.estimates("uniform").tolist()

    def test_fast_mode_caps_replicates(self):
        config = _study(replicates=5000, fast=True)
        assert config.effective_replicates == 500

    def test_gaussian_two_step(self):
        from wcp_prior.inference import run_study

        config = _study(
            model="gaussian_2d",
            true_params=[0.0, 0.5],
            n_obs=20,
            replicates=4,
            priors=[{"name": "wcp", "eta": 10.0}, {"name": "two_step", "eta1": 4.60517, "eta2": 46.0517}],
        )
        result = run_study(config, workers=1)
        assert result.estimates("two_step").shape == (4, 2)
        assert np.all(result.estimates("wcp")[:, 1] > 0)
        assert "eigenvalues" in result.summary["wcp"]

    def test_two_step_for_ar1_is_rejected(self):
        from wcp_prior.errors import ConfigurationError
        from wcp_prior.inference import build_priors

        with pytest.raises(ConfigurationError):
            build_priors(_study(priors=[{"name": "two_step", "eta1": 1.0, "eta2": 1.0}]))

    def test_duplicate_labels(self):
        from wcp_prior.errors import ConfigurationError
        from wcp_prior.inference import build_priors

        with pytest.raises(ConfigurationError):
            build_priors(_study(priors=[{"name": "uniform"}, {"name": "uniform"}]))

    def test_config_validation(self):
        from pydantic import ValidationError

        with pytest.raises(ValidationError):
            _study(true_params=[0.1, 0.2])
        with pytest.raises(ValidationError):
            _study(priors=[{"name": "two_step", "eta1": 1.0}])


class TestSummarize:
    def test_quartiles_and_eigenvalues(self):
        from wcp_prior.inference import summarize

        estimates = np.column_stack([np.arange(1.0, 6.0), 2.0 * np.arange(1.0, 6.0) + np.array([0, 1, 0, 1, 0])])
        out = summarize(estimates)
        assert out["median"] == [3.0, 6.0]
        assert out["iqr"][0] == 2.0
        assert len(out["eigenvalues"]) == 2
        assert out["eigen_ratio"] > 1


@pytest.mark.slow
class TestShrinkage:
    def test_wcp_pulls_ar1_towards_unit_root(self):
        from wcp_prior.inference import run_study

        result = run_study(_study(replicates=200), workers=1)
        wcp = np.median(result.estimates("wcp"))
        flat = np.median(result.estimates("uniform"))
        assert wcp > flat
        assert math.isfinite(wcp)
