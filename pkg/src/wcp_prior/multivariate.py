"""Multivariate WCP priors.

The joint law puts a (truncated) exponential distribution on w = W(theta) and
uniform distributions on an area-preserving chart of each level set S_w; the
density of theta follows by a change of variables. Bivariate priors go through
arc length along level curves given as function graphs; higher dimensions use
a generic level-set chart with nested quadrature.
"""

from __future__ import annotations

import functools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    AssumptionViolationError,
    DegenerateOrderError,
    DivergentIntegralError,
    DomainError,
)
from .univariate import (
    UnivariateFamily,
    UnivariatePrior,
    build_prior,
    gaussian_mean_prior,
    gaussian_sd_prior,
    gpd_tail_prior,
)
from .wasserstein import DistanceMap, interior_grid

logger = logging.getLogger(__name__)

Box = tuple[tuple[float, float], ...]
Orientation = Literal["theta1", "theta2"]

FD_STEP = 1e-5
ARC_REL_TOL = 1e-10
LEVEL_DIGITS = 10
CHECK_GRID = 16

TWO_STEP_PRESETS: dict[str, tuple[tuple[float, float], ...]] = {
    "gaussian": ((46.0517, 46.0517), (4.60517, 46.0517), (46.0517, 4.60517)),
    "gpd": ((10.0, 10.0), (10.0, 80.0), (80.0, 10.0)),
}


# ---------------------------------------------------------------------------
# Prior container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultivariatePrior:
    """A density on a box-shaped region, optionally cut down by ``indicator``.

    ``density`` takes one array per coordinate and is only trusted inside the
    region; ``__call__`` masks everything else (and the base point) to zero.
    """

    density: Callable[..., np.ndarray]
    distance: DistanceMap | None
    eta: float
    dimension: int
    region: Box
    indicator: Callable[..., np.ndarray] | None = None
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def contains(self, *theta) -> np.ndarray:
        coords = self._coords(theta)
        inside = np.ones(coords[0].shape, dtype=bool)
        for value, (lo, hi) in zip(coords, self.region):
            inside &= (value >= lo) & (value <= hi)
        if self.indicator is not None:
            inside &= np.asarray(self.indicator(*coords), dtype=bool)
        return inside

    def __call__(self, *theta) -> np.ndarray:
        coords = self._coords(theta)
        inside = self.contains(*coords)
        with np.errstate(all="ignore"):
            values = np.asarray(self.density(*coords), dtype=float)
        return np.where(inside & np.isfinite(values), values, 0.0)

    def log_density(self, *theta) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self(*theta))

    def at_points(self, points) -> np.ndarray:
        """Evaluate at an (n, dimension) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self(*pts.T)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.sampler is None:
            raise DomainError(f"prior '{self.label}' has no exact sampler")
        return self.sampler(rng, n)

    def _coords(self, theta) -> list[np.ndarray]:
        if len(theta) != self.dimension:
            raise DomainError(f"prior '{self.label}' takes {self.dimension} coordinates, got {len(theta)}")
        return np.broadcast_arrays(*(np.asarray(t, dtype=float) for t in theta))


def _normalizer(eta: float, c: float) -> float:
    if eta <= 0:
        raise DomainError(f"eta must be > 0, got {eta}")
    return 1.0 if math.isinf(c) else -math.expm1(-eta * c)


def gradient(distance: DistanceMap, *theta) -> np.ndarray:
    """Gradient of W stacked on the last axis; central differences without ``derivative``."""
    coords = np.broadcast_arrays(*(np.asarray(t, dtype=float) for t in theta))
    if distance.derivative is not None:
        return np.asarray(distance.derivative(*coords), dtype=float)
    columns = []
    for i, value in enumerate(coords):
        h = FD_STEP * (1.0 + np.abs(value))
        up = list(coords)
        down = list(coords)
        up[i] = value + h
        down[i] = value - h
        columns.append((np.asarray(distance.eval(*up)) - np.asarray(distance.eval(*down))) / (2.0 * h))
    return np.stack(columns, axis=-1)


def _arc_quad(fn: Callable[[float], float], lo: float, hi: float, rel_tol: float = ARC_REL_TOL) -> float:
    """Integrate fn over [lo, hi]; finite ranges go through x = lo + (hi-lo) sin^2(t/2).

    The substitution absorbs inverse square-root singularities at both ends.
    """
    if hi <= lo:
        return 0.0
    if math.isfinite(lo) and math.isfinite(hi):
        half = 0.5 * (hi - lo)

        def integrand(t: float) -> float:
            return fn(lo + 2.0 * half * math.sin(0.5 * t) ** 2) * half * math.sin(t)

        a, b = 0.0, math.pi
    else:
        integrand, a, b = fn, lo, hi
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rel_tol, limit=200)
        except integrate.IntegrationWarning as exc:
            raise DivergentIntegralError(f"arc-length integral over [{lo}, {hi}] did not converge: {exc}") from exc
    if not math.isfinite(value):
        raise DivergentIntegralError(f"arc-length integral over [{lo}, {hi}] is not finite")
    return value


# ---------------------------------------------------------------------------
# Bivariate priors from level curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelCurveFamily:
    """Level curves S_w written as graphs over one coordinate.

    With ``orientation="theta1"`` the curve is (x, graph_fn(x, w)) for x in
    ``theta1_range(w)``; with ``"theta2"`` the roles of the coordinates swap.
    """

    graph_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    theta1_range: Callable[[float], tuple[float, float]]
    graph_fn_dx: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    orientation: Orientation = "theta1"

    def point(self, x, w) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(self.graph_fn(x, w), dtype=float)
        return (x, y) if self.orientation == "theta1" else (y, x)

    def graph_variable(self, theta1, theta2) -> np.ndarray:
        return np.asarray(theta1 if self.orientation == "theta1" else theta2, dtype=float)

    def slope(self, x, w) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.graph_fn_dx is not None:
            return np.asarray(self.graph_fn_dx(x, w), dtype=float)
        h = 1e-7 * (1.0 + np.abs(x))
        return (np.asarray(self.graph_fn(x + h, w)) - np.asarray(self.graph_fn(x - h, w))) / (2.0 * h)

    def speed(self, x, w) -> np.ndarray:
        return np.sqrt(1.0 + self.slope(x, w) ** 2)

    def total_length(self, w: float, rel_tol: float = ARC_REL_TOL) -> float:
        lo, hi = self.theta1_range(w)
        return _arc_quad(lambda s: float(self.speed(s, w)), lo, hi, rel_tol)


def _check_curves(distance: DistanceMap, curves: LevelCurveFamily, tol: float = 1e-8) -> None:
    c = distance.supremum_c
    levels = [w for w in (0.1, 0.5, 1.0, 2.0, 5.0) if w < c] or [0.5 * c]
    for w in levels:
        lo, hi = curves.theta1_range(w)
        x = interior_grid(lo, hi, CHECK_GRID)
        with np.errstate(all="ignore"):
            values = np.asarray(distance.eval(*curves.point(x, w)), dtype=float)
        if not np.all(np.abs(values - w) <= tol * max(1.0, w)):
            worst = float(np.nanmax(np.abs(values - w)))
            raise AssumptionViolationError(f"level curves disagree with '{distance.label}' at w={w} (max error {worst:.3g})")


def _check_gradient(distance: DistanceMap) -> None:
    axes = [interior_grid(lo, hi, CHECK_GRID) for lo, hi in distance.domain]
    coords = np.meshgrid(*axes, indexing="ij")
    with np.errstate(all="ignore"):
        values = np.asarray(distance.eval(*coords), dtype=float)
        norms = np.linalg.norm(gradient(distance, *coords), axis=-1)
    flat = (values > 0) & ~(norms > 1e-12)
    if flat.any():
        where = tuple(float(c[flat][0]) for c in coords)
        raise AssumptionViolationError(f"gradient of '{distance.label}' vanishes at {where}")


def recipe1_bivariate(
    distance: DistanceMap,
    curves: LevelCurveFamily,
    eta: float,
    rel_tol: float = ARC_REL_TOL,
    check: bool = True,
    label: str = "",
) -> MultivariatePrior:
    """Bivariate WCP prior from level curves that are function graphs.

    pi(theta) = |det J| eta exp(-eta W) / (1 - exp(-eta c)) / l(W), where
    l(w) is the length of S_w and J the Jacobian of (W, u1). Because
    u1 depends on the graph variable x directly and on theta through w only,
    det J reduces to -dW/dy * sqrt(1 + f'(x; w)^2) with y the graph value.
    """
    if distance.dimension != 2:
        raise DomainError(f"level-curve construction needs a 2D distance, got dimension {distance.dimension}")
    norm = _normalizer(eta, distance.supremum_c)
    if check:
        _check_curves(distance, curves)
        _check_gradient(distance)
    other = 1 if curves.orientation == "theta1" else 0

    @functools.lru_cache(maxsize=8192)
    def length_at(level: float) -> float:
        return curves.total_length(level, rel_tol)

    def total_length(w: float) -> float:
        return length_at(float(f"{w:.{LEVEL_DIGITS}g}"))

    def density(theta1, theta2):
        w = np.asarray(distance.eval(theta1, theta2), dtype=float)
        x = curves.graph_variable(theta1, theta2)
        jac = np.abs(gradient(distance, theta1, theta2)[..., other]) * curves.speed(x, w)
        lengths = np.full(w.shape, np.nan)
        live = np.isfinite(w) & (w > 0)
        lengths[live] = [total_length(float(v)) for v in w[live]]
        return jac * eta * np.exp(-eta * w) / norm / lengths

    logger.info("level-curve prior '%s': eta=%g c=%g", label or distance.label, eta, distance.supremum_c)
    return MultivariatePrior(
        density=density,
        distance=distance,
        eta=float(eta),
        dimension=2,
        region=distance.domain,
        label=label or f"level-curve({distance.label})",
    )


# ---------------------------------------------------------------------------
# Catalog: Gaussian (m, sigma) and GPD (sigma, xi)
# ---------------------------------------------------------------------------


def gaussian_2d_distance() -> DistanceMap:
    """W_2 between N(m, sigma^2) and the Dirac at 0: sqrt(m^2 + sigma^2)."""

    def derivative(m, s):
        r = np.hypot(m, s)
        return np.stack([m / r, s / r], axis=-1)

    return DistanceMap(
        eval=lambda m, s: np.hypot(np.asarray(m, dtype=float), np.asarray(s, dtype=float)),
        domain=((-math.inf, math.inf), (0.0, math.inf)),
        base_point=(0.0, 0.0),
        derivative=derivative,
        label="gaussian-2d",
    )


def gaussian_2d_curves() -> LevelCurveFamily:
    """Semicircles sigma = sqrt(w^2 - m^2), m in (-w, w)."""
    return LevelCurveFamily(
        graph_fn=lambda m, w: np.sqrt(np.maximum(w * w - m * m, 0.0)),
        graph_fn_dx=lambda m, w: -m / np.sqrt(w * w - m * m),
        theta1_range=lambda w: (-w, w),
    )


def gpd_2d_distance() -> DistanceMap:
    """W_1 between GPD(sigma, xi) and the Dirac at 0: sigma / (1 - xi)."""

    def derivative(s, xi):
        tail = 1.0 - xi
        return np.stack([1.0 / tail * np.ones_like(s), s / tail**2], axis=-1)

    return DistanceMap(
        eval=lambda s, xi: np.asarray(s, dtype=float) / (1.0 - np.asarray(xi, dtype=float)),
        domain=((0.0, math.inf), (0.0, 1.0)),
        base_point=(0.0, 0.0),
        p=1.0,
        derivative=derivative,
        label="gpd-2d",
    )


def gpd_2d_curves() -> LevelCurveFamily:
    """Straight lines xi = 1 - sigma / w, sigma in (0, w)."""
    return LevelCurveFamily(
        graph_fn=lambda s, w: 1.0 - s / w,
        graph_fn_dx=lambda s, w: -np.ones_like(s) / w,
        theta1_range=lambda w: (0.0, w),
    )


def sample_bivariate_gaussian(eta: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """w ~ Exp(eta), angle ~ U(0, pi); returns an (n, 2) array of (m, sigma)."""
    _normalizer(eta, math.inf)
    w = rng.exponential(1.0 / eta, size=n)
    angle = rng.uniform(0.0, math.pi, size=n)
    return np.column_stack([w * np.cos(angle), w * np.sin(angle)])


def sample_bivariate_gpd(eta: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """w ~ Exp(eta) and a uniform position along the line; returns (sigma, xi)."""
    _normalizer(eta, math.inf)
    w = rng.exponential(1.0 / eta, size=n)
    u = rng.uniform(0.0, 1.0, size=n)
    return np.column_stack([u * w, 1.0 - u])


def bivariate_gaussian_prior(eta: float) -> MultivariatePrior:
    """pi(m, sigma) = eta exp(-eta r) / (pi r), r = sqrt(m^2 + sigma^2)."""
    _normalizer(eta, math.inf)

    def density(m, s):
        r = np.hypot(m, s)
        return eta * np.exp(-eta * r) / (math.pi * r)

    distance = gaussian_2d_distance()
    return MultivariatePrior(
        density=density,
        distance=distance,
        eta=float(eta),
        dimension=2,
        region=distance.domain,
        sampler=lambda rng, n: sample_bivariate_gaussian(eta, rng, n),
        label="gaussian-2d",
    )


def bivariate_gpd_prior(eta: float) -> MultivariatePrior:
    """pi(sigma, xi) = eta / (1 - xi) exp(-eta sigma / (1 - xi))."""
    _normalizer(eta, math.inf)

    def density(s, xi):
        tail = 1.0 - xi
        return eta / tail * np.exp(-eta * s / tail)

    distance = gpd_2d_distance()
    return MultivariatePrior(
        density=density,
        distance=distance,
        eta=float(eta),
        dimension=2,
        region=distance.domain,
        sampler=lambda rng, n: sample_bivariate_gpd(eta, rng, n),
        label="gpd-2d",
    )


# ---------------------------------------------------------------------------
# Change of variables and conic regions
# ---------------------------------------------------------------------------


def _polar_angle(x, y) -> np.ndarray:
    return np.mod(np.arctan2(y, x), 2.0 * math.pi)


@dataclass(frozen=True)
class ConicMap:
    """Angle rescaling between cones: r(cos t, sin t) -> r(cos t', sin t').

    t in [start, stop] maps linearly onto t' in [target_start, target_stop];
    the Jacobian determinant is the constant slope alpha.
    """

    start: float
    stop: float
    target_start: float = 0.0
    target_stop: float = math.pi / 2

    def __post_init__(self) -> None:
        if not (0.0 <= self.start < self.stop <= 2.0 * math.pi):
            raise DomainError(f"cone angles must satisfy 0 <= start < stop <= 2 pi, got [{self.start}, {self.stop}]")
        if not (0.0 <= self.target_start < self.target_stop <= 2.0 * math.pi):
            raise DomainError(
                f"target angles must satisfy 0 <= start < stop <= 2 pi, got [{self.target_start}, {self.target_stop}]"
            )

    @classmethod
    def onto_quadrant(cls, phi: float) -> "ConicMap":
        """The map of the cone [0, phi] onto the first quadrant, alpha = pi / (2 phi)."""
        return cls(0.0, phi)

    @property
    def alpha(self) -> float:
        return (self.target_stop - self.target_start) / (self.stop - self.start)

    def contains(self, x, y) -> np.ndarray:
        t = _polar_angle(x, y)
        return (t >= self.start) & (t <= self.stop)

    def __call__(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        r = np.hypot(x, y)
        t = self.target_start + self.alpha * (_polar_angle(x, y) - self.start)
        return r * np.cos(t), r * np.sin(t)

    def jacobian_det(self, x, y) -> np.ndarray:
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, self.alpha)


def _check_invertible(psi, jac_det, sample: np.ndarray) -> None:
    det = np.asarray(jac_det(*sample.T), dtype=float)
    if np.any(det == 0) or not (np.all(det > 0) or np.all(det < 0)):
        raise DomainError("map Jacobian vanishes or changes sign on the region")
    image = np.column_stack(psi(*sample.T))
    _, unique = np.unique(np.round(image, 10), axis=0, return_index=True)
    if unique.size < len(sample):
        raise DomainError("map is not injective on the region")


def _region_sample(region: Box, indicator) -> np.ndarray:
    axes = [interior_grid(lo, hi, CHECK_GRID) for lo, hi in region]
    pts = np.column_stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")])
    if indicator is not None:
        pts = pts[np.asarray(indicator(*pts.T), dtype=bool)]
    return pts


def conic_transform_prior(
    base: MultivariatePrior,
    psi: Callable[..., tuple[np.ndarray, ...]],
    jac_det: Callable[..., np.ndarray],
    region: Box | None = None,
    indicator: Callable[..., np.ndarray] | None = None,
    check: bool = True,
    label: str = "",
) -> MultivariatePrior:
    """Pull a prior back through psi: pi_hat(x) = |det J_psi(x)| pi(psi(x)).

    ``region``/``indicator`` describe the source domain of psi; the region
    defaults to the whole plane (or the base region when psi is the identity).
    A ``ConicMap`` can be passed as both ``psi`` and, via its ``contains``
    and ``jacobian_det``, the other pieces.
    """
    if isinstance(psi, ConicMap):
        indicator = psi.contains if indicator is None else indicator
    region = region if region is not None else tuple((-math.inf, math.inf) for _ in range(base.dimension))
    if check:
        sample = _region_sample(region, indicator)
        if len(sample) == 0:
            raise DomainError("source region of the map is empty")
        _check_invertible(psi, jac_det, sample)

    def density(*x):
        return np.abs(jac_det(*x)) * base(*psi(*x))

    return MultivariatePrior(
        density=density,
        distance=base.distance,
        eta=base.eta,
        dimension=base.dimension,
        region=region,
        indicator=indicator,
        label=label or f"transformed({base.label})",
    )


def conic_prior(base: MultivariatePrior, cone: ConicMap, label: str = "") -> MultivariatePrior:
    return conic_transform_prior(base, cone, cone.jacobian_det, label=label or f"conic({base.label})")


@dataclass(frozen=True)
class ConicUnion:
    """Cones with disjoint interiors, each carrying a transformed prior.

    The density is the weighted sum of the pieces; weights default to equal
    and are renormalized so the union integrates to one.
    """

    pieces: tuple[MultivariatePrior, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.pieces:
            raise DomainError("a conic union needs at least one piece")
        if len({p.dimension for p in self.pieces}) != 1:
            raise DomainError("pieces of a conic union must share the dimension")
        if self.weights is not None and (len(self.weights) != len(self.pieces) or min(self.weights) < 0):
            raise DomainError(f"need {len(self.pieces)} non-negative weights, got {self.weights}")

    @property
    def normalized_weights(self) -> np.ndarray:
        raw = np.ones(len(self.pieces)) if self.weights is None else np.asarray(self.weights, dtype=float)
        return raw / raw.sum()

    def __call__(self, *theta) -> np.ndarray:
        return sum(w * piece(*theta) for w, piece in zip(self.normalized_weights, self.pieces))

    def as_prior(self, label: str = "conic-union") -> MultivariatePrior:
        first = self.pieces[0]
        return MultivariatePrior(
            density=self,
            distance=first.distance,
            eta=first.eta,
            dimension=first.dimension,
            region=tuple((-math.inf, math.inf) for _ in range(first.dimension)),
            label=label,
        )


def reparameterize_nd(
    prior: MultivariatePrior,
    g_inverse: Callable[..., tuple[np.ndarray, ...]],
    g_inverse_jac_det: Callable[..., np.ndarray],
    region: Box,
    label: str = "",
) -> MultivariatePrior:
    """Density of phi = g(theta) given the inverse map and its Jacobian determinant."""
    return conic_transform_prior(
        prior, g_inverse, g_inverse_jac_det, region=region, check=False, label=label or f"reparam({prior.label})"
    )


# ---------------------------------------------------------------------------
# Level-set charts (any dimension)
# ---------------------------------------------------------------------------


def area_element(jacobian: np.ndarray) -> np.ndarray:
    """sqrt(det(J^T J)) for Jacobians of shape (..., n, n-1)."""
    jac = np.asarray(jacobian, dtype=float)
    gram = np.swapaxes(jac, -1, -2) @ jac
    return np.sqrt(np.abs(np.linalg.det(gram)))


@dataclass(frozen=True)
class LevelSetChart:
    """A product-of-intervals chart of each level set S_w.

    ``alpha(t, w)`` maps chart coordinates t (length n-1) to a point of S_w;
    ``chart(*theta)`` recovers t from a parameter point and ``bounds(w)`` gives
    the chart intervals. ``alpha_jacobian`` (n x (n-1)) is differenced when
    omitted.
    """

    alpha: Callable[[np.ndarray, float], np.ndarray]
    chart: Callable[..., np.ndarray]
    bounds: Callable[[float], Sequence[tuple[float, float]]]
    alpha_jacobian: Callable[[np.ndarray, float], np.ndarray] | None = None

    def jacobian(self, t: np.ndarray, w: float) -> np.ndarray:
        if self.alpha_jacobian is not None:
            return np.asarray(self.alpha_jacobian(t, w), dtype=float)
        columns = []
        for i in range(len(t)):
            h = 1e-6 * (1.0 + abs(t[i]))
            up, down = t.copy(), t.copy()
            up[i] += h
            down[i] -= h
            columns.append((np.asarray(self.alpha(up, w)) - np.asarray(self.alpha(down, w))) / (2.0 * h))
        return np.column_stack(columns)

    def area(self, t: np.ndarray, w: float) -> float:
        return float(area_element(self.jacobian(t, w)))

    def _mass(self, prefix: tuple[float, ...], w: float, bounds, rel_tol: float) -> float:
        i = len(prefix)
        if i == len(bounds):
            return self.area(np.array(prefix), w)
        lo, hi = bounds[i]
        return _arc_quad(lambda x: self._mass(prefix + (x,), w, bounds, rel_tol), lo, hi, rel_tol)

    def coordinates(self, t: Sequence[float], w: float, rel_tol: float = 1e-9) -> np.ndarray:
        """u_i(t_i; t_1..t_{i-1}, w): normalized partial area along each chart axis."""
        bounds = list(self.bounds(w))
        out = np.empty(len(bounds))
        for i, (lo, _) in enumerate(bounds):
            prefix = tuple(float(v) for v in t[:i])
            total = self._mass(prefix, w, bounds, rel_tol)
            part = _arc_quad(lambda x: self._mass(prefix + (x,), w, bounds, rel_tol), lo, float(t[i]), rel_tol)
            out[i] = part / total
        return out


def recipe2_density(
    distance: DistanceMap,
    chart: LevelSetChart,
    eta: float,
    region: Box | None = None,
    step: float = 1e-4,
    rel_tol: float = 1e-9,
    label: str = "",
) -> MultivariatePrior:
    """WCP prior through a level-set chart, Jacobian by central differences.

    theta -> (W(theta), u_1, ..., u_{n-1}); the density is |det J| times the
    truncated exponential density of W. Each point costs 2n chart evaluations
    of nested quadratures, so this is a validation path rather than a fast one.
    """
    norm = _normalizer(eta, distance.supremum_c)
    n = distance.dimension

    def lifted(theta: np.ndarray) -> np.ndarray:
        w = float(distance.eval(*theta))
        t = np.asarray(chart.chart(*theta), dtype=float)
        return np.concatenate([[w], chart.coordinates(t, w, rel_tol)])

    def point_density(theta: np.ndarray) -> float:
        w = float(distance.eval(*theta))
        if not w > 0:
            return math.nan
        jac = np.empty((n, n))
        for i in range(n):
            h = step * (1.0 + abs(theta[i]))
            up, down = theta.copy(), theta.copy()
            up[i] += h
            down[i] -= h
            jac[:, i] = (lifted(up) - lifted(down)) / (2.0 * h)
        return abs(np.linalg.det(jac)) * eta * math.exp(-eta * w) / norm

    def density(*theta):
        coords = np.broadcast_arrays(*(np.asarray(t, dtype=float) for t in theta))
        pts = np.column_stack([c.ravel() for c in coords])
        values = np.array([point_density(p) for p in pts])
        return values.reshape(coords[0].shape)

    return MultivariatePrior(
        density=density,
        distance=distance,
        eta=float(eta),
        dimension=n,
        region=region or distance.domain,
        label=label or f"level-set({distance.label})",
    )


def gaussian_cov_distance() -> DistanceMap:
    """Centered bivariate Gaussian (sigma1, sigma2, rho) against the Dirac at 0."""

    def derivative(s1, s2, rho):
        r = np.hypot(s1, s2)
        return np.stack([s1 / r, s2 / r, np.zeros_like(r)], axis=-1)

    return DistanceMap(
        eval=lambda s1, s2, rho: np.hypot(np.asarray(s1, dtype=float), np.asarray(s2, dtype=float)),
        domain=((0.0, math.inf), (0.0, math.inf), (-1.0, 1.0)),
        base_point=(0.0, 0.0, 0.0),
        derivative=derivative,
        label="gaussian-cov",
    )


def gaussian_cov_chart() -> LevelSetChart:
    """alpha(rho, sigma1) = (sigma1, sqrt(w^2 - sigma1^2), rho) on [-1, 1] x [0, w]."""

    def alpha(t, w):
        rho, s1 = t
        return np.array([s1, math.sqrt(max(w * w - s1 * s1, 0.0)), rho])

    def alpha_jacobian(t, w):
        _, s1 = t
        slope = -np.float64(s1) / np.sqrt(np.float64(w * w - s1 * s1))
        return np.array([[0.0, 1.0], [0.0, slope], [1.0, 0.0]])

    return LevelSetChart(
        alpha=alpha,
        chart=lambda s1, s2, rho: np.array([rho, s1]),
        bounds=lambda w: ((-1.0, 1.0), (0.0, w)),
        alpha_jacobian=alpha_jacobian,
    )


def cov_u1(rho):
    return (np.asarray(rho, dtype=float) + 1.0) / 2.0


def cov_u2(sigma1, w):
    sigma1 = np.asarray(sigma1, dtype=float)
    with np.errstate(divide="ignore"):
        return 2.0 / math.pi * np.arctan2(sigma1, np.sqrt(np.maximum(w * w - sigma1 * sigma1, 0.0)))


def recipe2_trivariate_gaussian_cov(eta: float) -> MultivariatePrior:
    """pi(sigma1, sigma2, rho) = eta exp(-eta r) / (pi r), r = sqrt(sigma1^2 + sigma2^2); flat in rho."""
    _normalizer(eta, math.inf)
    distance = gaussian_cov_distance()

    def density(s1, s2, rho):
        r = np.hypot(s1, s2)
        return eta * np.exp(-eta * r) / (math.pi * r) * np.ones_like(rho)

    def sampler(rng: np.random.Generator, n: int) -> np.ndarray:
        w = rng.exponential(1.0 / eta, size=n)
        angle = rng.uniform(0.0, math.pi / 2, size=n)
        rho = rng.uniform(-1.0, 1.0, size=n)
        return np.column_stack([w * np.sin(angle), w * np.cos(angle), rho])

    return MultivariatePrior(
        density=density,
        distance=distance,
        eta=float(eta),
        dimension=3,
        region=distance.domain,
        sampler=sampler,
        label="gaussian-cov",
    )


# ---------------------------------------------------------------------------
# Two-step priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoStepPrior:
    """pi(theta_first) * pi(theta_second | theta_first).

    ``second`` is either one univariate prior (when the conditional does not
    depend on the first coordinate) or a builder called per first value.
    ``first_index`` says which coordinate of (theta1, theta2) is drawn first.
    """

    first: UnivariatePrior
    second: UnivariatePrior | Callable[[float], UnivariatePrior]
    first_index: int = 0
    label: str = ""

    def _conditional(self, first_values: np.ndarray, second_values: np.ndarray) -> np.ndarray:
        if isinstance(self.second, UnivariatePrior):
            return np.asarray(self.second.density(second_values), dtype=float)
        out = np.empty(first_values.shape)
        for value in np.unique(first_values):
            mask = first_values == value
            out[mask] = self.second(float(value)).density(second_values[mask])
        return out

    def __call__(self, theta1, theta2) -> np.ndarray:
        t1, t2 = np.broadcast_arrays(np.asarray(theta1, dtype=float), np.asarray(theta2, dtype=float))
        a, b = (t1, t2) if self.first_index == 0 else (t2, t1)
        return np.asarray(self.first.density(a), dtype=float) * self._conditional(a, b)

    def log_density(self, theta1, theta2) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self(theta1, theta2))

    def as_prior(self, region: Box, distance: DistanceMap | None = None) -> MultivariatePrior:
        return MultivariatePrior(
            density=self,
            distance=distance,
            eta=self.first.eta_plus if self.first.family.plus is not None else self.first.eta_minus,
            dimension=2,
            region=region,
            label=self.label or "two-step",
        )


def first_step_distance(distance: DistanceMap, index: int) -> DistanceMap:
    """Slice W along one coordinate with the other held at its base value.

    Raises DegenerateOrderError when the slice is identically zero, which
    makes every first-step density vanish.
    """
    if distance.dimension != 2 or index not in (0, 1):
        raise DomainError(f"first_step_distance needs a 2D distance and index 0 or 1, got {index}")
    fixed = distance.base_point[1 - index]

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        args = (x, np.full(x.shape, fixed)) if index == 0 else (np.full(x.shape, fixed), x)
        return np.asarray(distance.eval(*args), dtype=float)

    lo, hi = distance.domain[index]
    with np.errstate(all="ignore"):
        probe = evaluate(interior_grid(lo, hi, CHECK_GRID))
    if not np.any(np.abs(probe) > 0):
        raise DegenerateOrderError(
            f"first step along coordinate {index} of '{distance.label}' has W identically zero; swap the order"
        )
    return DistanceMap(
        eval=evaluate,
        domain=(distance.domain[index],),
        base_point=(distance.base_point[index],),
        p=distance.p,
        label=f"{distance.label}[{index}]",
    )


def two_step_prior(
    step1: UnivariatePrior,
    step2: UnivariatePrior | Callable[[float], UnivariatePrior],
    first_index: int = 0,
    label: str = "",
) -> TwoStepPrior:
    lo, hi = step1.domain
    with np.errstate(all="ignore"):
        probe = np.asarray(step1.density(interior_grid(lo, hi, CHECK_GRID)), dtype=float)
    if not np.any(probe > 0):
        raise DegenerateOrderError(f"first-step density of '{step1.family.label}' is identically zero; swap the order")
    return TwoStepPrior(first=step1, second=step2, first_index=first_index, label=label)


def gaussian_two_step_prior(
    eta1: float, eta2: float, order: Literal["mean_first", "sd_first"] = "mean_first"
) -> TwoStepPrior:
    """(1/2) eta1 eta2 exp(-eta1 |m| - eta2 sigma) on (m, sigma); both orders agree."""
    if order == "mean_first":
        return two_step_prior(gaussian_mean_prior(eta1), gaussian_sd_prior(eta2), 0, "gaussian-two-step")
    return two_step_prior(gaussian_sd_prior(eta2), gaussian_mean_prior(eta1), 1, "gaussian-two-step")


def gpd_two_step_prior(
    eta1: float, eta2: float, order: Literal["sigma_first", "xi_first"] = "sigma_first"
) -> TwoStepPrior:
    """eta1 eta2 exp(-eta1 sigma - eta2 xi / (1 - xi)) / (1 - xi)^2 on (sigma, xi).

    Only sigma-first works: at sigma = 0 every xi gives the same Dirac model.
    """
    distance = gpd_2d_distance()
    index = 0 if order == "sigma_first" else 1
    slice_ = first_step_distance(distance, index)
    step1 = build_prior(UnivariateFamily(theta0=0.0, plus=slice_, label="gpd-sigma"), eta1)
    return two_step_prior(step1, gpd_tail_prior(eta2), index, "gpd-two-step")


def two_step_presets(model: Literal["gaussian", "gpd"]) -> list[TwoStepPrior]:
    build = gaussian_two_step_prior if model == "gaussian" else gpd_two_step_prior
    return [build(eta1, eta2) for eta1, eta2 in TWO_STEP_PRESETS[model]]
