"""Tests for the grid recipes that build univariate densities from W alone."""

from __future__ import annotations

import math

import numpy as np
import pytest


def _quadratic(s):
    s = np.asarray(s, dtype=float)
    return s + s**2


# ---------------------------------------------------------------------------
# approximate_prior_1d
# ---------------------------------------------------------------------------


class TestApproximatePrior:
    def test_linear_distance_reproduces_exponential_at_nodes(self):
        from wcp_prior.numeric1d import approximate_prior_1d

        d = approximate_prior_1d(lambda s: np.asarray(s, dtype=float), 0.0, eta=1.0, delta=1e-3, epsilon=0.01)
        np.testing.assert_allclose(d.values, np.exp(-d.grid), rtol=1e-9)
        assert d.z_star == pytest.approx(-math.log(1e-3), abs=0.01)
        assert math.isinf(d.c_hat)
        assert d.integral() == pytest.approx(1 - 1e-3, abs=1e-4)

    def test_minus_side_is_reflected(self):
        from wcp_prior.numeric1d import approximate_prior_1d

        d = approximate_prior_1d(lambda t: np.abs(np.asarray(t, dtype=float)), 0.0, 2.0, 1e-3, 0.01, side="minus")
        assert d.grid[-1] == 0.0
        assert np.all(np.diff(d.grid) > 0)
        assert d(-0.5) == pytest.approx(2.0 * math.exp(-1.0), rel=1e-3)
        assert d(0.5) == 0.0

    def test_first_order_convergence(self):
        from wcp_prior.numeric1d import approximate_prior_1d, tv_against_oracle

        eta = 1.0
        eps_list = [0.04, 0.02, 0.01, 0.005]

        def pdf(s):
            s = np.asarray(s, dtype=float)
            return eta * (1 + 2 * s) * np.exp(-eta * _quadratic(s))

        tvs = []
        for eps in eps_list:
            d = approximate_prior_1d(_quadratic, 0.0, eta, 1e-4, eps)
            tvs.append(tv_against_oracle(d, pdf, lambda z: math.exp(-eta * _quadratic(z))))
        assert all(a > b for a, b in zip(tvs, tvs[1:]))
        rate = np.polyfit(np.log(eps_list), np.log(tvs), 1)[0]
        assert rate == pytest.approx(1.0, abs=0.3)

    def test_bounded_supremum_fails_the_scan(self):
        from wcp_prior.errors import NumericalError
        from wcp_prior.numeric1d import approximate_prior_1d

        with pytest.raises(NumericalError):
            approximate_prior_1d(lambda s: np.tanh(s), 0.0, eta=1.0, delta=1e-3, epsilon=0.1, scan_cap=1000)

    def test_non_monotone_scan(self):
        from wcp_prior.errors import AssumptionViolationError
        from wcp_prior.numeric1d import approximate_prior_1d

        with pytest.raises(AssumptionViolationError):
            approximate_prior_1d(lambda s: np.abs(np.sin(s)), 0.0, eta=1.0, delta=1e-3, epsilon=0.1)

    def test_parameter_checks(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.numeric1d import approximate_prior_1d

        with pytest.raises(DomainError):
            approximate_prior_1d(_quadratic, 0.0, eta=-1.0, delta=1e-3, epsilon=0.1)
        with pytest.raises(DomainError):
            approximate_prior_1d(_quadratic, 0.0, eta=1.0, delta=1.0, epsilon=0.1)
        with pytest.raises(DomainError):
            approximate_prior_1d(_quadratic, 0.0, eta=1.0, delta=1e-3, epsilon=0.0)


# ---------------------------------------------------------------------------
# bounded_domain_variant / two_sided_prior_1d
# ---------------------------------------------------------------------------


class TestBoundedVariant:
    def test_gpd_tail_index(self):
        from wcp_prior.numeric1d import bounded_domain_variant
        from wcp_prior.univariate import gpd_tail_prior
        from wcp_prior.wasserstein import w1_gpd_tail

        d = bounded_domain_variant(w1_gpd_tail, (0.0, 1.0), eta=4.60517, epsilon=0.001)
        assert math.isinf(d.c_hat)
        assert d.grid[-1] < 1.0
        exact = gpd_tail_prior(4.60517)
        xi = np.linspace(0.05, 0.7, 50)
        np.testing.assert_allclose(d(xi), exact.density(xi), rtol=0.01)

    def test_finite_supremum_is_detected(self):
        from wcp_prior.numeric1d import bounded_domain_variant

        d = bounded_domain_variant(lambda x: np.asarray(x, dtype=float), (0.0, 0.3), eta=1.0, epsilon=0.01)
        assert d.c_hat == pytest.approx(0.3)
        assert d.integral() == pytest.approx(1.0, abs=1e-4)

    def test_uneven_last_step(self):
        from wcp_prior.numeric1d import bounded_domain_variant

        d = bounded_domain_variant(lambda x: np.asarray(x, dtype=float), (0.0, 0.305), eta=1.0, epsilon=0.01)
        assert d.grid[-1] == pytest.approx(0.305)
        assert d.grid[-1] - d.grid[-2] == pytest.approx(0.005)

    def test_needs_finite_interval(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.numeric1d import bounded_domain_variant

        with pytest.raises(DomainError):
            bounded_domain_variant(_quadratic, (0.0, math.inf), eta=1.0, epsilon=0.1)


class TestTwoSided:
    def test_laplace(self):
        from wcp_prior.numeric1d import two_sided_prior_1d

        absolute = lambda t: np.abs(np.asarray(t, dtype=float))  # noqa: E731
        d = two_sided_prior_1d(absolute, absolute, 0.0, 1.0, 1.0, 1e-4, 0.01)
        assert d(1.0) == pytest.approx(0.5 * math.exp(-1.0), rel=1e-3)
        assert d(-1.0) == pytest.approx(0.5 * math.exp(-1.0), rel=1e-3)
        assert d.integral() == pytest.approx(1 - 1e-4, abs=1e-3)


# ---------------------------------------------------------------------------
# GridDensity1D
# ---------------------------------------------------------------------------


class TestGridDensity:
    def _density(self):
        from wcp_prior.numeric1d import GridDensity1D

        grid = np.array([0.0, 1.0, 2.0])
        return GridDensity1D(0.0, grid, np.array([1.0, 0.5, 0.0]), 1.0, 0.0, 1.0, math.inf)

    def test_interpolates_and_vanishes_outside(self):
        d = self._density()
        assert d(0.5) == pytest.approx(0.75)
        np.testing.assert_array_equal(d(np.array([-1.0, 3.0])), [0.0, 0.0])

    def test_mass_between_is_exact(self):
        d = self._density()
        assert d.mass_between(0.0, 2.0) == pytest.approx(1.0)
        assert d.mass_between(0.5, 1.5) == pytest.approx(0.5)
        assert d.tail_probability(1.0) == pytest.approx(0.25)
        assert d.tail_probability(1.0, "below") == pytest.approx(0.75)
        assert d.mass_between(5.0, 6.0) == 0.0


# ---------------------------------------------------------------------------
# tv_1d
# ---------------------------------------------------------------------------


class TestTotalVariation1D:
    def test_exponentials(self):
        from scipy import stats

        from wcp_prior.numeric1d import tv_1d

        tv = tv_1d(stats.expon.pdf, stats.expon(scale=0.5).pdf, 0.0, 40.0)
        assert tv == pytest.approx(0.25, abs=1e-6)

    def test_identical_densities(self):
        from scipy import stats

        from wcp_prior.numeric1d import tv_1d

        assert tv_1d(stats.expon.pdf, stats.expon.pdf, 0.0, 40.0) == 0.0

    def test_disjoint_supports(self):
        from wcp_prior.numeric1d import tv_1d

        def box(a):
            return lambda x: ((x >= a) & (x < a + 1.0)).astype(float)

        assert tv_1d(box(0.0), box(2.0), 0.0, 3.0) == pytest.approx(1.0, abs=1e-4)

    def test_outside_mass_counts_half(self):
        from wcp_prior.numeric1d import tv_1d

        assert tv_1d(np.ones_like, np.ones_like, 0.0, 1.0, outside_mass=0.4) == pytest.approx(0.2)

    def test_empty_interval(self):
        from wcp_prior.errors import DomainError
        from wcp_prior.numeric1d import tv_1d

        with pytest.raises(DomainError):
            tv_1d(np.ones_like, np.ones_like, 1.0, 1.0)


# ---------------------------------------------------------------------------
# Student-t tail index
# ---------------------------------------------------------------------------


@pytest.mark.slow
class TestStudentT:
    def test_calibrated_tail_and_mode(self):
        from wcp_prior.numeric1d import bounded_domain_variant
        from wcp_prior.univariate import t_family
        from wcp_prior.validation import CalibrationTarget, calibrate_eta, grid_tail_probability

        family = t_family()
        eta = calibrate_eta(family, CalibrationTarget(U=0.2, alpha=0.1))
        d = bounded_domain_variant(family.plus, (0.0, 0.5), eta, 0.01)
        assert grid_tail_probability(d, 0.2) == pytest.approx(0.1, abs=0.005)
        assert int(np.argmax(d.values)) == 0
