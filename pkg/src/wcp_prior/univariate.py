"""Univariate WCP priors.

A prior puts a (truncated) exponential law on the distance W to the base
model on each side of theta0 and changes variables:

    pi(theta) = w_side * eta * exp(-eta W(theta)) / (1 - exp(-eta c)) * |W'(theta)|

with side weights w_minus, w_plus proportional to 1 - exp(-eta c).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import special

from .config import QuadConfig
from .errors import AssumptionViolationError, DomainError, NumericalError
from .wasserstein import (
    DistanceMap,
    ar1_supremum,
    interior_grid,
    w1_gpd_tail,
    w2_ar1,
    w2_ar1_derivative,
    w2_t_distribution,
)

logger = logging.getLogger(__name__)

Direction = Literal["above", "below"]
TailLaw = Literal["truncated", "exponential"]

CHECK_POINTS = 256


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnivariateFamily:
    """A two-sided distance map around ``theta0``.

    ``minus`` lives on (lo, theta0) and decreases towards the base model;
    ``plus`` lives on [theta0, hi) and increases away from it. Either may be
    missing when theta0 is an endpoint of the parameter space.
    """

    theta0: float
    minus: DistanceMap | None = None
    plus: DistanceMap | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if self.minus is None and self.plus is None:
            raise DomainError("a family needs at least one non-empty side")

    @property
    def domain(self) -> tuple[float, float]:
        lo = self.minus.domain[0][0] if self.minus is not None else self.theta0
        hi = self.plus.domain[0][1] if self.plus is not None else self.theta0
        return lo, hi

    def side_masks(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.domain
        in_minus = (theta > lo) & (theta < self.theta0) if self.minus is not None else np.zeros(theta.shape, bool)
        in_plus = (theta >= self.theta0) & (theta < hi) if self.plus is not None else np.zeros(theta.shape, bool)
        return in_minus, in_plus

    def distance(self, theta) -> np.ndarray:
        """Side-aware W(theta); NaN outside the parameter space."""
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, np.nan)
        in_minus, in_plus = self.side_masks(theta)
        if in_minus.any():
            out[in_minus] = self.minus.eval(theta[in_minus])
        if in_plus.any():
            out[in_plus] = self.plus.eval(theta[in_plus])
        return out

    def side_for(self, theta: float) -> Literal["minus", "plus"]:
        in_minus, in_plus = self.side_masks(np.array([theta], dtype=float))
        if in_minus[0]:
            return "minus"
        if in_plus[0]:
            return "plus"
        raise DomainError(f"theta={theta} is outside the parameter space {self.domain}")


def slope(distance: DistanceMap, theta: np.ndarray) -> np.ndarray:
    """dW/dtheta: analytic when available, else central differences.

    Differences become one-sided when the step would leave the domain.
    """
    theta = np.asarray(theta, dtype=float)
    if distance.derivative is not None:
        return np.asarray(distance.derivative(theta), dtype=float)
    lo, hi = distance.domain[0]
    h = 1e-6 * (np.abs(theta) + 1.0)
    a = np.where(theta - h > lo, theta - h, theta)
    b = np.where(theta + h < hi, theta + h, theta)
    return (np.asarray(distance.eval(b), dtype=float) - np.asarray(distance.eval(a), dtype=float)) / (b - a)


def _check_side(distance: DistanceMap, increasing: bool) -> None:
    distance.check()
    lo, hi = distance.domain[0]
    grid = interior_grid(lo, hi, CHECK_POINTS)
    values = np.asarray(distance.eval(grid), dtype=float)
    if not np.all(np.isfinite(values)):
        raise AssumptionViolationError(f"distance '{distance.label}' is not finite inside its domain")
    steps = np.diff(values) if increasing else -np.diff(values)
    tol = 1e-12 * max(1.0, float(np.abs(values).max()))
    if np.any(steps < -tol):
        where = grid[int(np.argmax(steps < -tol))]
        raise AssumptionViolationError(f"distance '{distance.label}' is not monotone near theta={where:.6g}")


# ---------------------------------------------------------------------------
# Monotone inversion
# ---------------------------------------------------------------------------


def from_unit(t: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Map (0, 1) increasingly onto (lo, hi), infinite ends included."""
    with np.errstate(divide="ignore"):
        if math.isfinite(lo) and math.isfinite(hi):
            return lo + t * (hi - lo)
        if math.isfinite(lo):
            return lo + t / (1.0 - t)
        if math.isfinite(hi):
            return hi - (1.0 - t) / t
        return special.logit(t)


def invert_monotone(
    fn: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    targets,
    increasing: bool,
    iterations: int = 80,
    rtol: float = 1e-6,
) -> np.ndarray:
    """Solve fn(theta) = target on (lo, hi) for every target by bisection."""
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    a = np.zeros_like(targets)
    b = np.ones_like(targets)
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        values = np.asarray(fn(from_unit(mid, lo, hi)), dtype=float)
        right = values < targets if increasing else values > targets
        a = np.where(right, mid, a)
        b = np.where(right, b, mid)
    theta = from_unit(0.5 * (a + b), lo, hi)
    finite = np.isfinite(theta)
    reached = np.full_like(targets, np.nan)
    if finite.any():
        reached[finite] = fn(theta[finite])
    checked = finite & np.isfinite(targets)
    residual = np.abs(np.where(checked, reached, 0.0) - np.where(checked, targets, 0.0))
    bad = residual > rtol * (1.0 + np.abs(np.where(checked, targets, 0.0)))
    if bad.any():
        i = int(np.argmax(bad))
        raise NumericalError(
            f"bisection on ({lo}, {hi}) failed: target {targets[i]:.6g}, reached {reached[i]:.6g} at theta={theta[i]:.6g}"
        )
    return theta


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------


def _mass(eta: float, c: float) -> float:
    """1 - exp(-eta c); 1 when c is infinite."""
    return 1.0 if math.isinf(c) else -math.expm1(-eta * c)


@dataclass(frozen=True)
class UnivariatePrior:
    family: UnivariateFamily
    eta_minus: float
    eta_plus: float
    c_minus: float
    c_plus: float
    w_minus: float
    w_plus: float

    @property
    def theta0(self) -> float:
        return self.family.theta0

    @property
    def domain(self) -> tuple[float, float]:
        return self.family.domain

    @property
    def z_minus(self) -> float:
        return _mass(self.eta_minus, self.c_minus) if self.family.minus is not None else 0.0

    @property
    def z_plus(self) -> float:
        return _mass(self.eta_plus, self.c_plus) if self.family.plus is not None else 0.0

    def distance(self, theta) -> np.ndarray:
        return self.family.distance(theta)

    def density(self, theta):
        arr = np.asarray(theta, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        out = np.zeros(flat.shape)
        in_minus, in_plus = self.family.side_masks(flat)
        with np.errstate(over="ignore", invalid="ignore"):
            for mask, side, eta, z, weight in (
                (in_minus, self.family.minus, self.eta_minus, self.z_minus, self.w_minus),
                (in_plus, self.family.plus, self.eta_plus, self.z_plus, self.w_plus),
            ):
                if not mask.any() or weight == 0.0:
                    continue
                x = flat[mask]
                w = np.asarray(side.eval(x), dtype=float)
                out[mask] = weight * eta * np.exp(-eta * w) / z * np.abs(slope(side, x))
        out = out.reshape(np.shape(arr))
        return float(out) if np.ndim(out) == 0 else out

    def __call__(self, theta):
        return self.density(theta)

    def log_density(self, theta):
        with np.errstate(divide="ignore"):
            return np.log(self.density(theta))

    def cdf(self, theta):
        """Exact distribution function through W."""
        arr = np.asarray(theta, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        lo, hi = self.domain
        out = np.where(flat >= hi, 1.0, 0.0)
        in_minus, in_plus = self.family.side_masks(flat)
        if in_minus.any():
            w = np.asarray(self.family.minus.eval(flat[in_minus]), dtype=float)
            floor = 0.0 if math.isinf(self.c_minus) else math.exp(-self.eta_minus * self.c_minus)
            out[in_minus] = self.w_minus * (np.exp(-self.eta_minus * w) - floor) / self.z_minus
        if in_plus.any():
            w = np.asarray(self.family.plus.eval(flat[in_plus]), dtype=float)
            out[in_plus] = self.w_minus + self.w_plus * (-np.expm1(-self.eta_plus * w)) / self.z_plus
        if self.family.plus is None:
            out = np.where(flat >= self.theta0, 1.0, out)
        out = np.clip(out, 0.0, 1.0).reshape(np.shape(arr))
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, u):
        """Inverse distribution function (vectorized bisection on W)."""
        arr = np.asarray(u, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        if np.any((flat < 0) | (flat > 1)):
            raise DomainError("probabilities must lie in [0, 1]")
        out = np.empty(flat.shape)
        on_minus = flat < self.w_minus if self.w_plus > 0 else np.ones(flat.shape, bool)
        if on_minus.any():
            floor = 0.0 if math.isinf(self.c_minus) else math.exp(-self.eta_minus * self.c_minus)
            level = floor + self.z_minus * np.minimum(flat[on_minus] / self.w_minus, 1.0)
            out[on_minus] = self._invert("minus", -np.log(level) / self.eta_minus)
        if (~on_minus).any():
            v = np.clip((flat[~on_minus] - self.w_minus) / self.w_plus, 0.0, 1.0)
            out[~on_minus] = self._invert("plus", -np.log1p(-self.z_plus * v) / self.eta_plus)
        out = out.reshape(np.shape(arr))
        return float(out) if np.ndim(out) == 0 else out

    def _invert(self, side_name: Literal["minus", "plus"], w: np.ndarray) -> np.ndarray:
        side = self.family.minus if side_name == "minus" else self.family.plus
        lo, hi = side.domain[0]
        if side_name == "minus":
            hi = self.theta0
        else:
            lo = self.theta0
        return invert_monotone(side.eval, lo, hi, w, increasing=side_name == "plus")

    def tail_probability(self, U: float, direction: Direction = "above") -> float:
        below = float(self.cdf(U))
        return 1.0 - below if direction == "above" else below


def build_prior(
    family: UnivariateFamily,
    eta_minus: float,
    eta_plus: float | None = None,
    check: bool = True,
) -> UnivariatePrior:
    """Build the WCP prior of a family; ``eta_plus`` defaults to ``eta_minus``.

    With ``check`` the monotonicity of each side is verified on a grid.
    """
    eta_plus = eta_minus if eta_plus is None else eta_plus
    if eta_minus <= 0 or eta_plus <= 0:
        raise DomainError(f"eta must be > 0, got eta_minus={eta_minus}, eta_plus={eta_plus}")
    if check:
        if family.minus is not None:
            _check_side(family.minus, increasing=False)
        if family.plus is not None:
            _check_side(family.plus, increasing=True)
    c_minus = family.minus.supremum_c if family.minus is not None else 0.0
    c_plus = family.plus.supremum_c if family.plus is not None else 0.0
    z_minus = _mass(eta_minus, c_minus) if family.minus is not None else 0.0
    z_plus = _mass(eta_plus, c_plus) if family.plus is not None else 0.0
    total = z_minus + z_plus
    prior = UnivariatePrior(
        family=family,
        eta_minus=float(eta_minus),
        eta_plus=float(eta_plus),
        c_minus=float(c_minus),
        c_plus=float(c_plus),
        w_minus=z_minus / total,
        w_plus=z_plus / total,
    )
    logger.debug("built prior '%s': w-=%.6g w+=%.6g c-=%g c+=%g", family.label, prior.w_minus, prior.w_plus, c_minus, c_plus)
    return prior


def sample(prior: UnivariatePrior, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw a side with probabilities (w-, w+), a truncated-exponential W, and invert W."""
    if n < 0:
        raise DomainError(f"sample count must be >= 0, got {n}")
    on_minus = rng.random(n) < prior.w_minus
    v = rng.random(n)
    out = np.empty(n)
    if on_minus.any():
        w = -np.log1p(-prior.z_minus * v[on_minus]) / prior.eta_minus
        out[on_minus] = prior._invert("minus", w)
    if (~on_minus).any():
        w = -np.log1p(-prior.z_plus * v[~on_minus]) / prior.eta_plus
        out[~on_minus] = prior._invert("plus", w)
    return out


def tail_probability(prior: UnivariatePrior, U: float, direction: Direction = "above", law: TailLaw = "truncated") -> float:
    """P(theta > U) or P(theta < U).

    ``law="exponential"`` drops the truncation at c, i.e. it uses
    P(W > w) = exp(-eta w) on each side.
    """
    if law == "truncated":
        return prior.tail_probability(U, direction)
    return exponential_tail(prior.family, U, prior.eta_minus, prior.eta_plus, direction)


def exponential_tail(
    family: UnivariateFamily,
    U: float,
    eta_minus: float,
    eta_plus: float,
    direction: Direction = "above",
    w_at_u: float | None = None,
) -> float:
    side = family.side_for(U)
    distance = family.minus if side == "minus" else family.plus
    w = float(distance.eval(np.array([U]))[0]) if w_at_u is None else w_at_u
    eta = eta_minus if side == "minus" else eta_plus
    z_minus = _mass(eta_minus, family.minus.supremum_c) if family.minus is not None else 0.0
    z_plus = _mass(eta_plus, family.plus.supremum_c) if family.plus is not None else 0.0
    weight = (z_minus if side == "minus" else z_plus) / (z_minus + z_plus)
    beyond = weight * math.exp(-eta * w)
    away = "below" if side == "minus" else "above"
    return beyond if direction == away else 1.0 - beyond


# ---------------------------------------------------------------------------
# Reparameterization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReparameterizedDensity:
    """Density of phi = g(theta): pi_phi(g(theta)) = pi(theta) / |g'(theta)|."""

    prior: UnivariatePrior
    g: Callable[[np.ndarray], np.ndarray]
    g_prime: Callable[[np.ndarray], np.ndarray]
    g_inverse: Callable[[np.ndarray], np.ndarray] | None
    increasing: bool

    def at_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.asarray(self.prior.density(theta)) / np.abs(np.asarray(self.g_prime(theta), dtype=float))

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self.g_inverse is not None:
            theta = np.asarray(self.g_inverse(phi), dtype=float)
        else:
            lo, hi = self.prior.domain
            theta = invert_monotone(self.g, lo, hi, phi.ravel(), self.increasing).reshape(phi.shape)
        return self.at_theta(theta)


def reparameterize(
    prior: UnivariatePrior,
    g: Callable[[np.ndarray], np.ndarray],
    g_prime: Callable[[np.ndarray], np.ndarray],
    g_inverse: Callable[[np.ndarray], np.ndarray] | None = None,
) -> ReparameterizedDensity:
    lo, hi = prior.domain
    grid = interior_grid(lo, hi, CHECK_POINTS)
    derivative = np.asarray(g_prime(grid), dtype=float)
    if np.any(derivative == 0) or not (np.all(derivative > 0) or np.all(derivative < 0)):
        raise DomainError("g' vanishes or changes sign on the parameter space")
    return ReparameterizedDensity(prior, g, g_prime, g_inverse, bool(derivative[0] > 0))


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------


def precision_family() -> UnivariateFamily:
    """Gaussian precision tau with base tau = inf: W_2 = tau^(-1/2)."""
    distance = DistanceMap(
        eval=lambda tau: np.asarray(tau, dtype=float) ** -0.5,
        domain=((0.0, math.inf),),
        base_point=(math.inf,),
        derivative=lambda tau: -0.5 * np.asarray(tau, dtype=float) ** -1.5,
        label="precision",
    )
    return UnivariateFamily(theta0=math.inf, minus=distance, label="precision")


def sd_family() -> UnivariateFamily:
    distance = DistanceMap(
        eval=lambda s: np.asarray(s, dtype=float),
        domain=((0.0, math.inf),),
        base_point=(0.0,),
        derivative=lambda s: np.ones(np.shape(s)),
        label="sd",
    )
    return UnivariateFamily(theta0=0.0, plus=distance, label="sd")


def mean_family() -> UnivariateFamily:
    """Gaussian mean with fixed variance: W_2 = |m| on both sides of 0."""
    minus = DistanceMap(
        eval=lambda m: np.abs(np.asarray(m, dtype=float)),
        domain=((-math.inf, 0.0),),
        base_point=(0.0,),
        derivative=lambda m: -np.ones(np.shape(m)),
        label="mean-",
    )
    plus = DistanceMap(
        eval=lambda m: np.abs(np.asarray(m, dtype=float)),
        domain=((0.0, math.inf),),
        base_point=(0.0,),
        derivative=lambda m: np.ones(np.shape(m)),
        label="mean+",
    )
    return UnivariateFamily(theta0=0.0, minus=minus, plus=plus, label="mean")


def ar1_family(n: int, sigma: float) -> UnivariateFamily:
    """AR(1) coefficient with base phi = 1; W decreases on [-1, 1)."""
    distance = DistanceMap(
        eval=lambda phi: w2_ar1(phi, n, sigma),
        domain=((-1.0, 1.0),),
        base_point=(1.0,),
        supremum_c=ar1_supremum(n, sigma),
        derivative=lambda phi: w2_ar1_derivative(phi, n, sigma),
        label=f"ar1(n={n}, sigma={sigma})",
        meta={"n": n, "sigma": sigma},
    )
    return UnivariateFamily(theta0=1.0, minus=distance, label="ar1")


def gpd_family() -> UnivariateFamily:
    """GPD tail index with base xi = 0: W_1 = xi / (1 - xi)."""
    distance = DistanceMap(
        eval=w1_gpd_tail,
        domain=((0.0, 1.0),),
        base_point=(0.0,),
        p=1.0,
        derivative=lambda xi: 1.0 / (1.0 - np.asarray(xi, dtype=float)) ** 2,
        label="gpd-xi",
    )
    return UnivariateFamily(theta0=0.0, plus=distance, label="gpd-xi")


def t_family(quad: QuadConfig | None = None) -> UnivariateFamily:
    """Student-t with xi = 1/nu against N(0, 1); W_2 has no closed form."""

    def evaluate(xi):
        arr = np.asarray(xi, dtype=float)
        values = np.array([w2_t_distribution(float(x), quad) for x in arr.ravel()])
        return values.reshape(arr.shape)

    distance = DistanceMap(eval=evaluate, domain=((0.0, 0.5),), base_point=(0.0,), label="t-xi")
    return UnivariateFamily(theta0=0.0, plus=distance, label="t-xi")


def gaussian_precision_prior(eta: float) -> UnivariatePrior:
    """Type-2 Gumbel: 0.5 tau^(-3/2) eta exp(-eta tau^(-1/2))."""
    return build_prior(precision_family(), eta)


def gaussian_sd_prior(eta: float) -> UnivariatePrior:
    return build_prior(sd_family(), eta)


def gaussian_mean_prior(eta_minus: float, eta_plus: float | None = None) -> UnivariatePrior:
    return build_prior(mean_family(), eta_minus, eta_plus)


def ar1_phi_prior(eta: float, n: int, sigma: float) -> UnivariatePrior:
    return build_prior(ar1_family(n, sigma), eta)


def gpd_tail_prior(eta: float) -> UnivariatePrior:
    """eta / (1 - xi)^2 exp(-eta xi / (1 - xi)) on [0, 1)."""
    return build_prior(gpd_family(), eta)
