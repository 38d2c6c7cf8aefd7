"""Wasserstein-p distances for the measure catalog.

Covers the 1D quantile and CDF formulas, the Gaussian trace formula, the
Dirac-base shortcut and the model-specific closed forms (AR(1), GPD tail,
Student-t against the standard normal).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special, stats

from .config import QuadConfig
from .errors import (
    AssumptionViolationError,
    DivergentIntegralError,
    DomainError,
    NonPSDError,
    NumericalError,
    UnsupportedMeasureError,
)

logger = logging.getLogger(__name__)

__all__ = [
    "Measure1D",
    "GaussianMeasure",
    "DiracMeasure",
    "DistanceMap",
    "interior_grid",
    "normal",
    "exponential",
    "uniform",
    "gpd",
    "student_t",
    "dirac",
    "wp_quantile_1d",
    "w1_cdf_1d",
    "w2_gaussian",
    "w2_gaussian_1d",
    "wp_dirac",
    "w2_ar1",
    "w2_ar1_derivative",
    "ar1_supremum",
    "w1_gpd_tail",
    "w2_t_distribution",
]

ArrayFn = Callable[[np.ndarray], np.ndarray]

PSD_TOL = 1e-8


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Measure1D:
    """A probability measure on the real line given by its quantile function.

    ``quantile`` and ``cdf`` must accept numpy arrays. ``moment_p(p)`` returns
    E|X|^p (possibly ``inf``).
    """

    quantile: ArrayFn
    cdf: ArrayFn | None = None
    moment_p: Callable[[float], float] | None = None
    label: str = ""

    def check(self, n: int = 64, tol: float = 1e-9) -> None:
        """Spot-check monotonicity and pseudo-inverse consistency on a grid."""
        t = np.linspace(0.01, 0.99, n)
        q = np.asarray(self.quantile(t), dtype=float)
        if np.any(np.diff(q) < -tol * (1.0 + np.abs(q[:-1]))):
            raise AssumptionViolationError(f"quantile of '{self.label}' is not nondecreasing")
        if self.cdf is not None:
            u = np.clip(np.asarray(self.cdf(q), dtype=float), 1e-12, 1.0 - 1e-12)
            back = np.asarray(self.quantile(u), dtype=float)
            if np.any(back > q + tol * (1.0 + np.abs(q))):
                raise AssumptionViolationError(f"quantile(cdf(x)) > x for '{self.label}'")


@dataclass(frozen=True)
class GaussianMeasure:
    """Multivariate normal; a zero covariance gives a Dirac measure."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DomainError(f"covariance shape {cov.shape} does not match mean length {d}")
        scale = max(1.0, float(np.abs(cov).max(initial=0.0)))
        if np.abs(cov - cov.T).max(initial=0.0) > 1e-12 * scale:
            raise DomainError("covariance is not symmetric")
        _psd_eigh(cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dimension(self) -> int:
        return int(self.mean.shape[0])

    @classmethod
    def dirac(cls, point: Sequence[float]) -> "GaussianMeasure":
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(point, np.zeros((point.size, point.size)))


@dataclass(frozen=True)
class DiracMeasure:
    support_point: np.ndarray

    def __post_init__(self) -> None:
        point = np.atleast_1d(np.asarray(self.support_point, dtype=float))
        if not np.all(np.isfinite(point)):
            raise DomainError(f"Dirac support point must be finite, got {point}")
        object.__setattr__(self, "support_point", point)


@dataclass(frozen=True)
class DistanceMap:
    """Distance to a fixed base model as a function of the parameters.

    ``domain`` holds one (lo, hi) interval per coordinate; ``base_point`` may
    contain infinities (e.g. the precision of a Gaussian, whose base is
    tau = inf). ``derivative`` is dW/dtheta in 1D or the gradient (stacked on
    the last axis) in higher dimensions.
    """

    eval: Callable[..., np.ndarray]
    domain: tuple[tuple[float, float], ...]
    base_point: tuple[float, ...]
    p: float = 2.0
    supremum_c: float = math.inf
    derivative: Callable[..., np.ndarray] | None = None
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, *theta):
        return self.eval(*theta)

    @property
    def dimension(self) -> int:
        return len(self.domain)

    def check(self, n: int = 64, slack: float = 1e-9) -> None:
        """Check the limit at the base point and the supremum bound on samples."""
        if self.dimension == 1:
            self._check_1d(n, slack)
        else:
            self._check_nd(n, slack)

    def _check_1d(self, n: int, slack: float) -> None:
        (lo, hi), base = self.domain[0], self.base_point[0]
        if math.isinf(base):
            approach = np.sign(base) * np.logspace(2, 12, 6)
        else:
            inward = 1.0 if base <= lo else -1.0
            approach = base + inward * np.logspace(-2, -10, 6)
        values = np.asarray(self.eval(approach), dtype=float)
        if not values[-1] <= 1e-3 * max(1.0, values[0]):
            raise AssumptionViolationError(f"distance '{self.label}' does not vanish at the base point")
        grid = interior_grid(lo, hi, n)
        inside = np.asarray(self.eval(grid), dtype=float)
        if np.any(inside > self.supremum_c + slack):
            raise AssumptionViolationError(f"distance '{self.label}' exceeds its supremum c={self.supremum_c}")

    def _check_nd(self, n: int, slack: float) -> None:
        base = np.asarray(self.base_point, dtype=float)
        lows = np.array([lo for lo, _ in self.domain])
        highs = np.array([hi for _, hi in self.domain])
        rng = np.random.default_rng(0)
        directions = rng.normal(size=(n, base.size))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        for scale in (1e-2, 1e-6):
            pts = base + scale * directions
            ok = np.all((pts >= lows) & (pts <= highs), axis=1)
            if not ok.any():
                continue
            vals = np.asarray(self.eval(*pts[ok].T), dtype=float)
            if np.any(vals > 10 * scale * max(1.0, float(np.max(np.abs(base))))):
                raise AssumptionViolationError(f"distance '{self.label}' does not vanish at the base point")


def interior_grid(lo: float, hi: float, n: int) -> np.ndarray:
    t = np.linspace(1e-3, 1.0 - 1e-3, n)
    if math.isfinite(lo) and math.isfinite(hi):
        return lo + t * (hi - lo)
    if math.isfinite(lo):
        return lo + t / (1.0 - t)
    if math.isfinite(hi):
        return hi - (1.0 - t) / t
    return special.logit(t)


# ---------------------------------------------------------------------------
# Catalog constructors
# ---------------------------------------------------------------------------


def _expect_moment(frozen) -> Callable[[float], float]:
    def moment(p: float) -> float:
        with np.errstate(all="ignore"):
            value = float(frozen.expect(lambda x: np.abs(x) ** p))
        return value if np.isfinite(value) else math.inf

    return moment


def normal(mean: float = 0.0, sd: float = 1.0) -> Measure1D:
    if sd < 0:
        raise DomainError(f"standard deviation must be >= 0, got {sd}")
    if sd == 0:
        return dirac(mean)
    frozen = stats.norm(loc=mean, scale=sd)
    return Measure1D(frozen.ppf, frozen.cdf, _expect_moment(frozen), f"N({mean}, {sd}^2)")


def exponential(rate: float = 1.0) -> Measure1D:
    if rate <= 0:
        raise DomainError(f"rate must be > 0, got {rate}")
    frozen = stats.expon(scale=1.0 / rate)
    return Measure1D(frozen.ppf, frozen.cdf, _expect_moment(frozen), f"Exp({rate})")


def uniform(a: float = 0.0, b: float = 1.0) -> Measure1D:
    if not a < b:
        raise DomainError(f"uniform needs a < b, got [{a}, {b}]")
    frozen = stats.uniform(loc=a, scale=b - a)
    return Measure1D(frozen.ppf, frozen.cdf, _expect_moment(frozen), f"U[{a}, {b}]")


def gpd(xi: float, sigma: float = 1.0) -> Measure1D:
    """Generalized Pareto with tail index ``xi`` >= 0 and scale ``sigma``."""
    if xi < 0 or sigma <= 0:
        raise DomainError(f"GPD needs xi >= 0 and sigma > 0, got xi={xi}, sigma={sigma}")
    frozen = stats.genpareto(c=xi, scale=sigma)

    def moment(p: float) -> float:
        if xi > 0 and p * xi >= 1:
            return math.inf
        return _expect_moment(frozen)(p)

    return Measure1D(frozen.ppf, frozen.cdf, moment, f"GPD({xi}, {sigma})")


def student_t(nu: float) -> Measure1D:
    if nu <= 0:
        raise DomainError(f"degrees of freedom must be > 0, got {nu}")
    frozen = stats.t(df=nu)

    def moment(p: float) -> float:
        if p >= nu:
            return math.inf
        return _expect_moment(frozen)(p)

    return Measure1D(frozen.ppf, frozen.cdf, moment, f"t({nu})")


def dirac(s: float) -> Measure1D:
    s = float(s)

    def quantile(t):
        return np.full(np.shape(t), s, dtype=float)

    def cdf(x):
        return np.where(np.asarray(x, dtype=float) >= s, 1.0, 0.0)

    def moment(p: float) -> float:
        return abs(s) ** p

    return Measure1D(quantile, cdf, moment, f"delta({s})")


# ---------------------------------------------------------------------------
# 1D formulas
# ---------------------------------------------------------------------------


def _tail_mass(integrand: ArrayFn, edge: float, inner: float) -> float:
    """Integrate a power-law tail between ``edge`` (0 or 1) and ``inner``.

    The exponent is read off the integrand at distances q and q/10 from the
    edge. Exponents >= 1 mean the integral diverges.
    """
    q = abs(inner - edge)
    g1, g2 = (float(v) for v in integrand(np.array([inner, edge + (inner - edge) / 10.0])))
    if g1 <= 0.0 or g2 <= 0.0:
        return 0.0
    slope = math.log10(g2 / g1)
    if slope >= 1.0:
        raise DivergentIntegralError(f"quantile integrand decays too slowly near t={edge} (exponent {slope:.3f})")
    return g1 * q / (1.0 - slope)


def wp_quantile_1d(mu: Measure1D, nu: Measure1D, p: float = 1.0, quad: QuadConfig | None = None) -> float:
    """W_p between two 1D measures via the quantile integral.

    The integral over [q, 1-q] uses the composite trapezoid rule in the logit
    variable s = log(t / (1 - t)), halving panels until successive estimates
    agree to ``quad.abs_tol``.
    """
    if p < 1:
        raise DomainError(f"order p must be >= 1, got {p}")
    quad = quad or QuadConfig()

    def integrand(t: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            values = np.abs(np.asarray(mu.quantile(t), dtype=float) - np.asarray(nu.quantile(t), dtype=float)) ** p
        if not np.all(np.isfinite(values)):
            bad = np.asarray(t)[~np.isfinite(values)]
            raise DivergentIntegralError(f"non-finite quantile difference at t={bad[:3]}")
        return values

    def weighted(s: np.ndarray) -> np.ndarray:
        t = special.expit(s)
        return integrand(t) * t * (1.0 - t)

    a = float(special.logit(quad.q))
    b = -a
    panels = quad.initial_panels
    h = (b - a) / panels
    values = weighted(np.linspace(a, b, panels + 1))
    estimate = h * (values.sum() - 0.5 * (values[0] + values[-1]))
    for _ in range(quad.max_halvings):
        midpoints = a + h * (np.arange(panels) + 0.5)
        refined = 0.5 * estimate + 0.5 * h * weighted(midpoints).sum()
        panels *= 2
        h /= 2.0
        converged = abs(refined - estimate) < quad.abs_tol
        estimate = refined
        if converged:
            break
    else:
        logger.warning("quantile integral did not reach abs_tol=%g (last estimate %.12g)", quad.abs_tol, estimate)

    if quad.tail_correction:
        estimate += _tail_mass(integrand, 0.0, quad.q) + _tail_mass(integrand, 1.0, 1.0 - quad.q)
    return float(max(estimate, 0.0) ** (1.0 / p))


def w1_cdf_1d(mu: Measure1D, nu: Measure1D, quad: QuadConfig | None = None) -> float:
    """W_1 as the area between the two distribution functions."""
    if mu.cdf is None or nu.cdf is None:
        raise UnsupportedMeasureError("w1_cdf_1d needs the cdf of both measures")
    quad = quad or QuadConfig()

    def gap(x: float) -> float:
        return float(abs(np.asarray(mu.cdf(x)) - np.asarray(nu.cdf(x))))

    levels = np.array([0.0, quad.q, 0.25, 0.5, 0.75, 1.0 - quad.q, 1.0])
    with np.errstate(all="ignore"):
        marks = np.concatenate([np.asarray(mu.quantile(levels)), np.asarray(nu.quantile(levels))])
    inner = marks[[1, 5, 8, 12]]
    lo, hi = float(inner.min()), float(inner.max())
    breaks = sorted({float(m) for m in marks if np.isfinite(m) and lo < m < hi})
    options = dict(limit=500, epsabs=1e-12, epsrel=1e-10)
    total, _ = integrate.quad(gap, lo, hi, points=breaks or None, **options)
    left, _ = integrate.quad(gap, -np.inf, lo, **options)
    right, _ = integrate.quad(gap, hi, np.inf, **options)
    total += left + right
    if not math.isfinite(total):
        raise DivergentIntegralError("cdf gap integral diverged")
    return float(total)


def w2_gaussian_1d(m1: float, s1: float, m2: float, s2: float) -> float:
    return math.hypot(m1 - m2, s1 - s2)


# ---------------------------------------------------------------------------
# Gaussian and Dirac formulas
# ---------------------------------------------------------------------------


def _psd_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sym = 0.5 * (matrix + matrix.T)
    values, vectors = np.linalg.eigh(sym)
    if values.size and values.min() < -PSD_TOL:
        raise NonPSDError(f"matrix has eigenvalue {values.min():.3e} < -{PSD_TOL}")
    floor = 1e-12 * max(1.0, float(values.max(initial=0.0)))
    values = np.where(values <= floor, 0.0, values)
    return values, vectors


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = _psd_eigh(matrix)
    return (vectors * np.sqrt(values)) @ vectors.T


def w2_gaussian(mu: GaussianMeasure, nu: GaussianMeasure) -> float:
    """W_2 between two Gaussians through the trace formula."""
    if mu.dimension != nu.dimension:
        raise DomainError(f"dimension mismatch: {mu.dimension} vs {nu.dimension}")
    root = _psd_sqrt(mu.covariance)
    cross = _psd_sqrt(root @ nu.covariance @ root)
    squared = (
        float(np.sum((mu.mean - nu.mean) ** 2))
        + float(np.trace(mu.covariance))
        + float(np.trace(nu.covariance))
        - 2.0 * float(np.trace(cross))
    )
    return math.sqrt(max(squared, 0.0))


def wp_dirac(
    s: DiracMeasure,
    mu: Measure1D | GaussianMeasure | DiracMeasure,
    p: float = 2.0,
    quad: QuadConfig | None = None,
) -> float:
    """W_p(delta_s, mu) = (E||X - s||^p)^(1/p)."""
    if p < 1:
        raise DomainError(f"order p must be >= 1, got {p}")
    point = s.support_point
    if isinstance(mu, DiracMeasure):
        if mu.support_point.shape != point.shape:
            raise DomainError("dimension mismatch between Dirac measures")
        return float(np.linalg.norm(mu.support_point - point))
    if isinstance(mu, GaussianMeasure):
        if mu.dimension != point.size:
            raise DomainError(f"dimension mismatch: {mu.dimension} vs {point.size}")
        if p == 2:
            return math.sqrt(float(np.sum((mu.mean - point) ** 2)) + float(np.trace(mu.covariance)))
        if mu.dimension == 1:
            return wp_dirac(s, normal(float(mu.mean[0]), math.sqrt(float(mu.covariance[0, 0]))), p, quad)
        raise UnsupportedMeasureError("Dirac distance to a multivariate Gaussian is only available for p = 2")
    if point.size != 1:
        raise DomainError("a 1D measure needs a 1D Dirac support point")
    centre = float(point[0])
    if centre == 0.0 and mu.moment_p is not None:
        moment = mu.moment_p(p)
        if not math.isfinite(moment):
            raise DivergentIntegralError(f"E|X|^{p} is infinite for '{mu.label}'")
        return float(moment ** (1.0 / p))
    return wp_quantile_1d(dirac(centre), mu, p, quad)


# ---------------------------------------------------------------------------
# Model-specific closed forms
# ---------------------------------------------------------------------------


def _ar1_check(n: int, sigma: float) -> None:
    if int(n) != n or n < 2:
        raise DomainError(f"series length n must be an integer >= 2, got {n}")
    if sigma <= 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")


def _ar1_deficit(phi: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (n^2 - S, -dS/dphi) where S = sum_ij phi^|i-j|.

    The 1 - phi^k terms use expm1 for phi > 0 so the deficit keeps full
    relative precision as phi -> 1.
    """
    k = np.arange(1, n, dtype=float)
    weights = n - k
    ph = phi[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(np.where(ph > 0, ph, 1.0))
        positive = -np.expm1(k * logs)
    terms = np.where(ph > 0, positive, 1.0 - np.power(ph, k))
    deficit = 2.0 * terms @ weights
    slope = 2.0 * np.power(ph, k - 1.0) @ (weights * k)
    return deficit, slope


def w2_ar1(phi, n: int, sigma: float = 1.0):
    """W_2 between a stationary AR(1) of length n and its phi = 1 base model.

    Equal to sqrt(2 sigma^2 (n - f(phi; n) / (1 - phi))) with
    f(phi; n) = sqrt(n (1 - phi^2) - 2 phi (1 - phi^n)); phi = 1 returns 0.
    """
    _ar1_check(n, sigma)
    arr = np.asarray(phi, dtype=float)
    if np.any(arr < -1.0) or np.any(arr > 1.0):
        raise DomainError("phi must lie in [-1, 1]")
    deficit, _ = _ar1_deficit(arr, int(n))
    root = np.sqrt(np.maximum(n * n - deficit, 0.0))
    result = sigma * np.sqrt(np.maximum(2.0 * deficit / (n + root), 0.0))
    return float(result) if np.ndim(result) == 0 else result


def w2_ar1_derivative(phi, n: int, sigma: float = 1.0):
    """dW_2/dphi for the AR(1) family (negative on (-1, 1))."""
    _ar1_check(n, sigma)
    arr = np.asarray(phi, dtype=float)
    deficit, slope = _ar1_deficit(arr, int(n))
    root = np.sqrt(np.maximum(n * n - deficit, 0.0))
    w = sigma * np.sqrt(np.maximum(2.0 * deficit / (n + root), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        result = -(sigma**2) * slope / (2.0 * w * root)
    return float(result) if np.ndim(result) == 0 else result


def ar1_supremum(n: int, sigma: float = 1.0) -> float:
    _ar1_check(n, sigma)
    return sigma * math.sqrt(2 * n - math.sqrt(2.0) * math.sqrt(1.0 - (-1.0) ** n))


def w1_gpd_tail(xi):
    """W_1 between GPD(xi, 1) and Exp(1): xi / (1 - xi)."""
    arr = np.asarray(xi, dtype=float)
    if np.any(arr < 0) or np.any(arr >= 1):
        raise DomainError("tail index xi must lie in [0, 1)")
    result = arr / (1.0 - arr)
    return float(result) if np.ndim(result) == 0 else result


def w2_t_distribution(xi: float, quad: QuadConfig | None = None, check_cutoffs: bool = False) -> float:
    """W_2 between Student-t with nu = 1/xi degrees of freedom and N(0, 1).

    With ``check_cutoffs`` the integral is repeated at a tail cutoff ten
    times larger and the two values must agree to 1e-4.
    """
    if xi < 0:
        raise DomainError(f"xi must be >= 0, got {xi}")
    if xi >= 0.5:
        raise DivergentIntegralError(f"t-distribution with xi={xi} has no finite second moment")
    if xi == 0:
        return 0.0
    quad = quad or QuadConfig()
    value = wp_quantile_1d(student_t(1.0 / xi), normal(), 2.0, quad)
    if check_cutoffs:
        coarse = wp_quantile_1d(student_t(1.0 / xi), normal(), 2.0, quad.model_copy(update={"q": quad.q * 10}))
        if abs(coarse - value) > 1e-4:
            raise NumericalError(f"tail cutoffs disagree for xi={xi}: {value:.8f} vs {coarse:.8f}")
        if abs(coarse - value) > 1e-6:
            logger.warning("t-distance cutoffs differ by %.2e at xi=%g", abs(coarse - value), xi)
    return value
