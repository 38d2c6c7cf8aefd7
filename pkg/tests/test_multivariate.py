"""Tests for multivariate WCP priors."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats


def _grid(lo1, hi1, lo2, hi2, n=50):
    a, b = np.meshgrid(np.linspace(lo1, hi1, n), np.linspace(lo2, hi2, n), indexing="ij")
    return a, b


# ---------------------------------------------------------------------------
# recipe1_bivariate
# ---------------------------------------------------------------------------


class TestLevelCurveConstruction:
    def test_gaussian_semicircles_match_closed_form(self):
        from wcp_prior.multivariate import bivariate_gaussian_prior, gaussian_2d_curves, gaussian_2d_distance, recipe1_bivariate

        eta = 2.0
        numeric = recipe1_bivariate(gaussian_2d_distance(), gaussian_2d_curves(), eta)
        m, s = _grid(-1.5, 1.5, 0.02, 1.5)
        np.testing.assert_allclose(numeric(m, s), bivariate_gaussian_prior(eta)(m, s), rtol=1e-6)

    def test_gpd_lines_match_closed_form(self):
        from wcp_prior.multivariate import bivariate_gpd_prior, gpd_2d_curves, gpd_2d_distance, recipe1_bivariate

        eta = 20.0
        numeric = recipe1_bivariate(gpd_2d_distance(), gpd_2d_curves(), eta)
        s, xi = _grid(0.005, 0.3, 0.01, 0.95)
        np.testing.assert_allclose(numeric(s, xi), bivariate_gpd_prior(eta)(s, xi), rtol=1e-6)

    def test_arc_length_computed_once_per_level(self, monkeypatch):
        from wcp_prior import multivariate
        from wcp_prior.multivariate import bivariate_gaussian_prior, gaussian_2d_curves, gaussian_2d_distance, recipe1_bivariate

        calls = []
        real = multivariate.LevelCurveFamily.total_length

        def counting(self, w, rel_tol=multivariate.ARC_REL_TOL):
            calls.append(w)
            return real(self, w, rel_tol)

        monkeypatch.setattr(multivariate.LevelCurveFamily, "total_length", counting)
        numeric = recipe1_bivariate(gaussian_2d_distance(), gaussian_2d_curves(), 2.0)
        m = np.array([-0.3, 0.3, 0.4, -0.4])
        s = np.array([0.4, 0.4, 0.3, 0.3])
        first = numeric(m, s)
        second = numeric(m, s)
        assert len(calls) == 1
        np.testing.assert_array_equal(first, second)
        np.testing.assert_allclose(first, bivariate_gaussian_prior(2.0)(m, s), rtol=1e-6)

    def test_inconsistent_curves_rejected(self):
        from wcp_prior.errors import AssumptionViolationError
        from wcp_prior.multivariate import gaussian_2d_distance, gpd_2d_curves, recipe1_bivariate

        with pytest.raises(AssumptionViolationError):
            recipe1_bivariate(gaussian_2d_distance(), gpd_2d_curves(), 1.0)

    def test_needs_two_dimensions(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.multivariate import gaussian_2d_curves, gaussian_cov_distance, recipe1_bivariate

        with pytest.raises(DomainError):
            recipe1_bivariate(gaussian_cov_distance(), gaussian_2d_curves(), 1.0)

    def test_no_sampler(self, rng):
        from wcp_prior.errors import DomainError
        from wcp_prior.multivariate import gaussian_2d_curves, gaussian_2d_distance, recipe1_bivariate

        prior = recipe1_bivariate(gaussian_2d_distance(), gaussian_2d_curves(), 1.0)
        with pytest.raises(DomainError):
            prior.sample(rng, 10)


# ---------------------------------------------------------------------------
# Closed forms and samplers
# ---------------------------------------------------------------------------


class TestClosedForms:
    def test_gaussian_masks_outside_and_base(self):
        from wcp_prior.multivariate import bivariate_gaussian_prior

        prior = bivariate_gaussian_prior(1.0)
        np.testing.assert_array_equal(prior(np.array([0.0, 1.0]), np.array([0.0, -0.5])), [0.0, 0.0])

    def test_gaussian_sampler_distance_is_exponential(self, rng):
        from wcp_prior.multivariate import sample_bivariate_gaussian

        draws = sample_bivariate_gaussian(3.0, rng, 4000)
        assert np.all(draws[:, 1] >= 0)
        assert stats.kstest(np.hypot(draws[:, 0], draws[:, 1]), stats.expon(scale=1 / 3.0).cdf).pvalue > 1e-3

    def test_gpd_sampler_stays_in_domain(self, rng):
        from wcp_prior.multivariate import bivariate_gpd_prior

        draws = bivariate_gpd_prior(20.0).sample(rng, 1000)
        assert np.all(draws[:, 0] >= 0)
        assert np.all((draws[:, 1] >= 0) & (draws[:, 1] <= 1))

    def test_wrong_coordinate_count(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.multivariate import bivariate_gaussian_prior

        with pytest.raises(DomainError):
            bivariate_gaussian_prior(1.0)(1.0, 2.0, 3.0)

    def test_non_positive_eta(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.multivariate import bivariate_gpd_prior

        with pytest.raises(DomainError):
            bivariate_gpd_prior(0.0)


# ---------------------------------------------------------------------------
# Conic maps
# ---------------------------------------------------------------------------


def _quadrant_prior(eta):
    from wcp_prior.multivariate import MultivariatePrior

    def density(x, y):
        r = np.hypot(x, y)
        return eta * np.exp(-eta * r) / (0.5 * math.pi * r)

    return MultivariatePrior(density, None, eta, 2, ((0.0, math.inf), (0.0, math.inf)), label="quadrant")


class TestConic:
    def test_alpha(self):
        from wcp_prior.multivariate import ConicMap

        assert ConicMap.onto_quadrant(math.pi).alpha == pytest.approx(0.5)
        assert ConicMap.onto_quadrant(math.pi / 4).alpha == pytest.approx(2.0)

    def test_half_plane_from_quadrant(self):
        from wcp_prior.multivariate import ConicMap, bivariate_gaussian_prior, conic_prior

        eta = 1.5
        half = conic_prior(_quadrant_prior(eta), ConicMap.onto_quadrant(math.pi))
        m, s = _grid(-2.0, 2.0, 0.05, 2.0, n=20)
        np.testing.assert_allclose(half(m, s), bivariate_gaussian_prior(eta)(m, s), rtol=1e-10)
        assert half(1.0, -1.0) == 0.0

    def test_union_of_half_planes(self):
        from wcp_prior.multivariate import ConicMap, ConicUnion, conic_prior

        eta = 1.0
        upper = conic_prior(_quadrant_prior(eta), ConicMap(0.0, math.pi))
        lower = conic_prior(_quadrant_prior(eta), ConicMap(math.pi, 2 * math.pi))
        union = ConicUnion((upper, lower)).as_prior()
        r = math.sqrt(2.0)
        expected = eta * math.exp(-eta * r) / (2 * math.pi * r)
        assert union(1.0, 1.0) == pytest.approx(expected)
        assert union(-1.0, -1.0) == pytest.approx(expected)

    def test_union_weights(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.multivariate import ConicUnion

        piece = _quadrant_prior(1.0)
        np.testing.assert_allclose(ConicUnion((piece, piece), (1.0, 3.0)).normalized_weights, [0.25, 0.75])
        with pytest.raises(DomainError):
            ConicUnion((piece,), (1.0, 2.0))
        with pytest.raises(DomainError):
            ConicUnion(())

    def test_bad_angles(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.multivariate import ConicMap

        with pytest.raises(DomainError):
            ConicMap(1.0, 0.5)

    def test_non_injective_map_rejected(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.multivariate import conic_transform_prior

        fold = lambda x, y: (np.abs(x), np.abs(y))  # noqa: E731
        with pytest.raises(DomainError):
            conic_transform_prior(_quadrant_prior(1.0), fold, lambda x, y: np.sign(x) * np.sign(y) + 0.0 * x)

    def test_reparameterize_log_scale(self):
        from wcp_prior.multivariate import bivariate_gaussian_prior, reparameterize_nd

        prior = bivariate_gaussian_prior(1.0)
        logged = reparameterize_nd(
            prior,
            g_inverse=lambda m, u: (m, np.exp(u)),
            g_inverse_jac_det=lambda m, u: np.exp(u),
            region=((-math.inf, math.inf), (-math.inf, math.inf)),
        )
        assert logged(0.3, -1.0) == pytest.approx(math.exp(-1.0) * prior(0.3, math.exp(-1.0)))


# ---------------------------------------------------------------------------
# Level-set charts
# ---------------------------------------------------------------------------


class TestLevelSetChart:
    def test_area_element_of_orthonormal_columns(self):
        from wcp_prior.multivariate import area_element

        jac = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        assert area_element(jac) == pytest.approx(1.0)

    def test_covariance_chart_coordinates(self):
        from wcp_prior.multivariate import cov_u1, cov_u2, gaussian_cov_chart

        chart = gaussian_cov_chart()
        w, rho, s1 = 2.0, 0.4, 1.2
        u = chart.coordinates(np.array([rho, s1]), w)
        assert u[0] == pytest.approx(float(cov_u1(rho)), rel=1e-7)
        assert u[1] == pytest.approx(float(cov_u2(s1, w)), rel=1e-7)

    @pytest.mark.slow
    def test_level_set_chart_matches_closed_form(self):
        from wcp_prior.multivariate import gaussian_cov_chart, gaussian_cov_distance, recipe2_density, recipe2_trivariate_gaussian_cov

        eta = 1.0
        numeric = recipe2_density(gaussian_cov_distance(), gaussian_cov_chart(), eta)
        exact = recipe2_trivariate_gaussian_cov(eta)
        points = np.array([[0.5, 0.8, 0.1], [1.2, 0.3, -0.6], [0.7, 0.7, 0.5]])
        np.testing.assert_allclose(numeric.at_points(points), exact.at_points(points), rtol=1e-3)

    def test_covariance_sampler_in_domain(self, rng):
        from wcp_prior.multivariate import recipe2_trivariate_gaussian_cov

        draws = recipe2_trivariate_gaussian_cov(2.0).sample(rng, 500)
        assert np.all(draws[:, :2] >= 0)
        assert np.all(np.abs(draws[:, 2]) <= 1)


# ---------------------------------------------------------------------------
# Two-step priors
# ---------------------------------------------------------------------------


class TestTwoStep:
    def test_gaussian_orders_agree(self):
        from wcp_prior.multivariate import gaussian_two_step_prior

        m, s = _grid(-0.3, 0.3, 0.001, 0.3, n=15)
        a = gaussian_two_step_prior(46.0517, 4.60517)(m, s)
        b = gaussian_two_step_prior(46.0517, 4.60517, order="sd_first")(m, s)
        expected = 0.5 * 46.0517 * 4.60517 * np.exp(-46.0517 * np.abs(m) - 4.60517 * s)
        np.testing.assert_allclose(a, expected, rtol=1e-12)
        np.testing.assert_allclose(b, expected, rtol=1e-12)

    def test_gpd_sigma_first(self):
        from wcp_prior.multivariate import gpd_two_step_prior

        s, xi = _grid(0.01, 0.5, 0.0, 0.5, n=15)
        expected = 10.0 * 80.0 * np.exp(-10.0 * s - 80.0 * xi / (1 - xi)) / (1 - xi) ** 2
        np.testing.assert_allclose(gpd_two_step_prior(10.0, 80.0)(s, xi), expected, rtol=1e-7)

    def test_gpd_xi_first_is_degenerate(self):
        from wcp_prior.errors import DegenerateOrderError
        from wcp_prior.multivariate import gpd_two_step_prior

        with pytest.raises(DegenerateOrderError):
            gpd_two_step_prior(10.0, 10.0, order="xi_first")

    def test_presets(self):
        from wcp_prior.multivariate import TWO_STEP_PRESETS, two_step_presets

        assert len(two_step_presets("gaussian")) == len(TWO_STEP_PRESETS["gaussian"]) == 3
        assert len(two_step_presets("gpd")) == 3

    def test_as_prior_masks_region(self):
        from wcp_prior.multivariate import gaussian_two_step_prior, gaussian_2d_distance

        prior = gaussian_two_step_prior(1.0, 1.0).as_prior(gaussian_2d_distance().domain, gaussian_2d_distance())
        assert prior(0.5, -0.1) == 0.0
        assert prior(0.5, 0.1) > 0.0

    def test_first_step_index(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.multivariate import first_step_distance, gpd_2d_distance

        with pytest.raises(DomainError):
            first_step_distance(gpd_2d_distance(), 2)
