"""Tests for the Wasserstein distance catalog."""

from __future__ import annotations

import math

import numpy as np
import pytest


# ---------------------------------------------------------------------------
# wp_quantile_1d / w1_cdf_1d
# ---------------------------------------------------------------------------


class TestQuantileFormula:
    def test_shifted_normals(self):
        from wcp_prior.wasserstein import normal, wp_quantile_1d

        assert wp_quantile_1d(normal(0, 1), normal(2, 1), p=2) == pytest.approx(2.0, abs=1e-5)
        assert wp_quantile_1d(normal(0, 1), normal(2, 1), p=1) == pytest.approx(2.0, abs=1e-5)

    def test_gaussian_closed_form_1d(self):
        from wcp_prior.wasserstein import normal, w2_gaussian_1d, wp_quantile_1d

        numeric = wp_quantile_1d(normal(1.0, 0.5), normal(-0.5, 2.0), p=2)
        assert numeric == pytest.approx(w2_gaussian_1d(1.0, 0.5, -0.5, 2.0), abs=1e-4)

    def test_exponentials_w1(self):
        from wcp_prior.wasserstein import exponential, wp_quantile_1d

        assert wp_quantile_1d(exponential(1.0), exponential(2.0), p=1) == pytest.approx(0.5, abs=1e-4)

    def test_symmetric(self):
        from wcp_prior.wasserstein import exponential, normal, wp_quantile_1d

        a = wp_quantile_1d(normal(0, 1), exponential(1.0), p=2)
        b = wp_quantile_1d(exponential(1.0), normal(0, 1), p=2)
        assert a == pytest.approx(b, rel=1e-12)

    def test_triangle_inequality(self):
        from wcp_prior.wasserstein import exponential, normal, uniform, wp_quantile_1d

        mu, nu, rho = normal(0, 1), exponential(1.0), uniform(0, 1)
        d_mn = wp_quantile_1d(mu, nu, p=2)
        d_nr = wp_quantile_1d(nu, rho, p=2)
        d_mr = wp_quantile_1d(mu, rho, p=2)
        assert d_mr <= d_mn + d_nr + 1e-8

    def test_identical_measures_are_at_zero(self):
        from wcp_prior.wasserstein import gpd, wp_quantile_1d

        assert wp_quantile_1d(gpd(0.2), gpd(0.2), p=1) == pytest.approx(0.0, abs=1e-12)

    def test_order_below_one_rejected(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.wasserstein import normal, wp_quantile_1d

        with pytest.raises(DomainError):
            wp_quantile_1d(normal(), normal(), p=0.5)

    def test_heavy_tail_diverges(self):
        from wcp_prior.errors import DivergentIntegralError
        from wcp_prior.wasserstein import normal, student_t, wp_quantile_1d

        # Cauchy has no mean, so even W1 to a normal is infinite
        with pytest.raises(DivergentIntegralError):
            wp_quantile_1d(student_t(1.0), normal(), p=1)


class TestCdfFormula:
    def test_matches_quantile_formula(self):
        from wcp_prior.wasserstein import exponential, w1_cdf_1d

        assert w1_cdf_1d(exponential(1.0), exponential(2.0)) == pytest.approx(0.5, abs=1e-8)

    def test_needs_cdf(self):
        from wcp_prior.errors import UnsupportedMeasureError
        from wcp_prior.wasserstein import Measure1D, normal, w1_cdf_1d

        bare = Measure1D(quantile=normal().quantile)
        with pytest.raises(UnsupportedMeasureError):
            w1_cdf_1d(bare, normal())


class TestMeasureCheck:
    def test_decreasing_quantile_rejected(self):
        from wcp_prior.errors import AssumptionViolationError
        from wcp_prior.wasserstein import Measure1D

        with pytest.raises(AssumptionViolationError):
            Measure1D(quantile=lambda t: -np.asarray(t), label="reversed").check()

    def test_catalog_measures_pass(self):
        from wcp_prior.wasserstein import exponential, gpd, normal, student_t, uniform

        for measure in (normal(1, 2), exponential(3.0), uniform(-1, 1), gpd(0.3), student_t(4.0)):
            measure.check()


# ---------------------------------------------------------------------------
# w2_gaussian / wp_dirac
# ---------------------------------------------------------------------------


class TestGaussian:
    def test_mean_shift(self):
        from wcp_prior.wasserstein import GaussianMeasure, w2_gaussian

        mu = GaussianMeasure([0.0, 0.0], np.eye(2))
        nu = GaussianMeasure([3.0, 4.0], np.eye(2))
        assert w2_gaussian(mu, nu) == pytest.approx(5.0, rel=1e-12)

    def test_scaled_covariance(self):
        from wcp_prior.wasserstein import GaussianMeasure, w2_gaussian

        mu = GaussianMeasure([0.0, 0.0], np.eye(2))
        nu = GaussianMeasure([0.0, 0.0], 4.0 * np.eye(2))
        assert w2_gaussian(mu, nu) == pytest.approx(math.sqrt(2.0), rel=1e-10)

    def test_dirac_base_reduces_to_second_moment(self):
        from wcp_prior.wasserstein import GaussianMeasure, w2_gaussian

        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        mu = GaussianMeasure([1.0, -1.0], cov)
        base = GaussianMeasure.dirac([0.0, 0.0])
        assert w2_gaussian(mu, base) == pytest.approx(math.sqrt(2.0 + np.trace(cov)), rel=1e-10)

    def test_singular_base(self):
        from wcp_prior.wasserstein import GaussianMeasure, w2_ar1, w2_gaussian

        base = GaussianMeasure([0.0, 0.0], np.ones((2, 2)))
        nu = GaussianMeasure([0.0, 0.0], np.eye(2))
        expected = math.sqrt(4.0 - 2.0 * math.sqrt(2.0))
        assert w2_gaussian(base, nu) == pytest.approx(expected, rel=1e-10)
        assert w2_ar1(0.0, 2, 1.0) == pytest.approx(expected, rel=1e-10)

    def test_non_psd_rejected(self):
        from wcp_prior.errors import NonPSDError
        from wcp_prior.wasserstein import GaussianMeasure

        with pytest.raises(NonPSDError):
            GaussianMeasure([0.0, 0.0], np.diag([1.0, -1.0]))

    def test_dimension_mismatch(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.wasserstein import GaussianMeasure, w2_gaussian

        with pytest.raises(DomainError):
            w2_gaussian(GaussianMeasure([0.0], [[1.0]]), GaussianMeasure([0.0, 0.0], np.eye(2)))


class TestDirac:
    def test_exponential_second_moment(self):
        from wcp_prior.wasserstein import DiracMeasure, exponential, wp_dirac

        assert wp_dirac(DiracMeasure([0.0]), exponential(1.0), p=2) == pytest.approx(math.sqrt(2.0), rel=1e-6)

    def test_off_origin_uses_quantiles(self):
        from wcp_prior.wasserstein import DiracMeasure, normal, wp_dirac

        # E(X - 1)^2 = 1 + 1 for X ~ N(0, 1)
        assert wp_dirac(DiracMeasure([1.0]), normal(), p=2) == pytest.approx(math.sqrt(2.0), abs=1e-5)

    def test_gaussian_sd_pair(self):
        from wcp_prior.wasserstein import DiracMeasure, GaussianMeasure, wp_dirac

        mu = GaussianMeasure([0.0, 0.0], np.diag([0.09, 0.16]))
        assert wp_dirac(DiracMeasure([0.0, 0.0]), mu) == pytest.approx(0.5, rel=1e-12)

    def test_infinite_moment(self):
        from wcp_prior.errors import DivergentIntegralError
        from wcp_prior.wasserstein import DiracMeasure, gpd, wp_dirac

        with pytest.raises(DivergentIntegralError):
            wp_dirac(DiracMeasure([0.0]), gpd(0.6), p=2)

    def test_non_finite_support_rejected(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.wasserstein import DiracMeasure

        with pytest.raises(DomainError):
            DiracMeasure([math.inf])


# ---------------------------------------------------------------------------
# Model-specific closed forms
# ---------------------------------------------------------------------------


class TestAR1:
    def test_matches_closed_form(self):
        from wcp_prior.wasserstein import w2_ar1

        n, sigma = 10, 0.1
        phi = np.linspace(-0.95, 0.95, 39)
        f = np.sqrt(n * (1 - phi**2) - 2 * phi * (1 - phi**n))
        expected = np.sqrt(2 * sigma**2 * (n - f / (1 - phi)))
        np.testing.assert_allclose(w2_ar1(phi, n, sigma), expected, rtol=1e-9)

    def test_base_point_and_supremum(self):
        from wcp_prior.wasserstein import ar1_supremum, w2_ar1

        assert w2_ar1(1.0, 10, 0.1) == pytest.approx(0.0, abs=1e-15)
        assert w2_ar1(-1.0, 10, 0.1) == pytest.approx(ar1_supremum(10, 0.1), rel=1e-12)
        assert ar1_supremum(10, 0.1) == pytest.approx(0.1 * math.sqrt(20.0), rel=1e-12)

    def test_decreasing_in_phi(self):
        from wcp_prior.wasserstein import w2_ar1

        values = w2_ar1(np.linspace(-0.99, 0.99, 200), 100, 1.0)
        assert np.all(np.diff(values) < 0)

    def test_precise_near_one(self):
        from wcp_prior.wasserstein import w2_ar1

        value = w2_ar1(1.0 - 1e-10, 10, 1.0)
        assert 0.0 < value < 1e-3

    def test_derivative_matches_finite_difference(self):
        from wcp_prior.wasserstein import w2_ar1, w2_ar1_derivative

        phi, h = 0.3, 1e-6
        fd = (w2_ar1(phi + h, 10, 0.1) - w2_ar1(phi - h, 10, 0.1)) / (2 * h)
        assert w2_ar1_derivative(phi, 10, 0.1) == pytest.approx(fd, rel=1e-5)

    def test_invalid_arguments(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.wasserstein import w2_ar1

        with pytest.raises(DomainError):
            w2_ar1(1.5, 10)
        with pytest.raises(DomainError):
            w2_ar1(0.5, 1)
        with pytest.raises(DomainError):
            w2_ar1(0.5, 10, sigma=0.0)


class TestTails:
    def test_gpd_tail(self):
        from wcp_prior.wasserstein import w1_gpd_tail

        assert w1_gpd_tail(0.5) == pytest.approx(1.0)
        np.testing.assert_allclose(w1_gpd_tail(np.array([0.0, 0.2])), [0.0, 0.25])

    def test_gpd_tail_matches_quantile_integral(self):
        from wcp_prior.wasserstein import exponential, gpd, w1_gpd_tail, wp_quantile_1d

        assert wp_quantile_1d(gpd(0.25), exponential(1.0), p=1) == pytest.approx(w1_gpd_tail(0.25), abs=1e-4)

    def test_heavier_gpd_tail_matches_closed_form(self):
        from wcp_prior.wasserstein import exponential, gpd, wp_quantile_1d

        assert wp_quantile_1d(gpd(0.5), exponential(1.0), p=1) == pytest.approx(1.0, abs=1e-3)

    def test_gpd_tail_domain(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.wasserstein import w1_gpd_tail

        with pytest.raises(DomainError):
            w1_gpd_tail(1.0)

    def test_t_distance(self):
        from wcp_prior.wasserstein import w2_t_distribution

        assert w2_t_distribution(0.0) == 0.0
        values = [w2_t_distribution(xi) for xi in (0.05, 0.15, 0.3)]
        assert values[0] > 0
        assert values == sorted(values)

    def test_t_distance_diverges(self):
        from wcp_prior.errors import DivergentIntegralError
        from wcp_prior.wasserstein import w2_t_distribution

        with pytest.raises(DivergentIntegralError):
            w2_t_distribution(0.5)
