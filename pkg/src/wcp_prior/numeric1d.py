"""Grid approximation of univariate WCP densities from a distance evaluator.

The density is built on a regular grid of width eps starting at the base
point theta0 and extended by zero outside the grid. The grid ends at the
cutoff z* where W first reaches w* = -log(delta) / eta, so the prior mass
dropped beyond z* is delta.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import integrate

from .errors import AssumptionViolationError, DivergentIntegralError, DomainError, NumericalError
from .wasserstein import DistanceMap

logger = logging.getLogger(__name__)

Side = Literal["plus", "minus"]
Evaluator = Callable[[np.ndarray], np.ndarray]

DEFAULT_SCAN_CAP = 10**6


# ---------------------------------------------------------------------------
# Grid densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridDensity1D:
    """Piecewise-linear density on an increasing grid, zero outside it."""

    theta0: float
    grid: np.ndarray
    values: np.ndarray
    eta: float
    delta: float
    epsilon: float
    c_hat: float
    z_star: float = math.nan
    n_star: int | None = None

    @property
    def support(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def __call__(self, theta):
        return density_eval_1d(self, theta)

    def integral(self) -> float:
        return float(integrate.trapezoid(self.values, self.grid))

    def mass_between(self, a: float, b: float) -> float:
        """Exact integral of the interpolant over [a, b]."""
        lo, hi = self.support
        a, b = max(a, lo), min(b, hi)
        if a >= b:
            return 0.0
        inner = self.grid[(self.grid > a) & (self.grid < b)]
        points = np.concatenate([[a], inner, [b]])
        return float(integrate.trapezoid(np.interp(points, self.grid, self.values), points))

    def tail_probability(self, U: float, direction: Literal["above", "below"] = "above") -> float:
        lo, hi = self.support
        return self.mass_between(U, hi) if direction == "above" else self.mass_between(lo, U)


def density_eval_1d(d: GridDensity1D, theta):
    """Linear interpolation on the grid, 0 outside it."""
    arr = np.asarray(theta, dtype=float)
    values = np.interp(arr, d.grid, d.values, left=0.0, right=0.0)
    lo, hi = d.support
    values = np.where((arr < lo) | (arr > hi), 0.0, values)
    return float(values) if np.ndim(values) == 0 else values


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _evaluator(W: DistanceMap | Evaluator) -> Evaluator:
    fn = W.eval if isinstance(W, DistanceMap) else W

    def evaluate(theta: np.ndarray) -> np.ndarray:
        return np.asarray(fn(np.asarray(theta, dtype=float)), dtype=float)

    return evaluate


def _oriented(W: Evaluator, theta0: float, side: Side) -> Evaluator:
    """W as an increasing function of the offset s = |theta - theta0|."""
    if side == "plus":
        return lambda s: W(theta0 + s)
    return lambda s: W(theta0 - s)


def _truncation(c_hat: float, eta: float) -> float:
    return 1.0 if math.isinf(c_hat) else -math.expm1(-eta * c_hat)


def _c_hat(values_at_scan: np.ndarray, eta: float, epsilon: float) -> float:
    """Infinite when some scanned value exceeds -log(eps^2 / (1 + eps^2)) / eta."""
    threshold = -math.log(epsilon**2 / (1.0 + epsilon**2)) / eta
    finite = values_at_scan[np.isfinite(values_at_scan)]
    if finite.size == 0 or np.any(~np.isfinite(values_at_scan)) or finite.max() > threshold:
        return math.inf
    return float(finite.max())


def _assemble(
    w_values: np.ndarray,
    eta: float,
    epsilon: float,
    c_hat: float,
    extra: float | None,
) -> np.ndarray:
    """Forward differences and the density values.

    ``extra`` is W one step past the last node; without it the last node
    reuses the previous slope.
    """
    ahead = np.empty_like(w_values)
    ahead[:-1] = np.diff(w_values) / epsilon
    ahead[-1] = (extra - w_values[-1]) / epsilon if extra is not None else ahead[-2] if len(ahead) > 1 else 0.0
    return np.abs(ahead) * eta * np.exp(-eta * w_values) / _truncation(c_hat, eta)


def _to_theta(offsets: np.ndarray, values: np.ndarray, theta0: float, side: Side) -> tuple[np.ndarray, np.ndarray]:
    if side == "plus":
        return theta0 + offsets, values
    return (theta0 - offsets)[::-1], values[::-1]


def _check_params(eta: float, epsilon: float, delta: float | None = None) -> None:
    if eta <= 0:
        raise DomainError(f"eta must be > 0, got {eta}")
    if epsilon <= 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    if delta is not None and not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")


# ---------------------------------------------------------------------------
# Recipes
# ---------------------------------------------------------------------------


def approximate_prior_1d(
    W: DistanceMap | Evaluator,
    theta0: float,
    eta: float,
    delta: float,
    epsilon: float,
    side: Side = "plus",
    scan_cap: int = DEFAULT_SCAN_CAP,
) -> GridDensity1D:
    """Approximate a one-sided WCP density on an unbounded side of theta0.

    ``side="minus"`` runs the same steps on the reflected offset theta0 - theta.
    """
    _check_params(eta, epsilon, delta)
    Ws = _oriented(_evaluator(W), theta0, side)
    w_star = -math.log(delta) / eta

    # integer scan for N*, in blocks of doubling size
    n_star, previous, start, block = None, 0.0, 1, 64
    while start <= scan_cap:
        ks = np.arange(start, min(start + block, scan_cap + 1), dtype=float)
        values = Ws(ks)
        if np.any(np.diff(np.concatenate([[previous], values])) < 0):
            raise AssumptionViolationError(f"W is not increasing on the integer scan near offset {ks[0]:g}")
        hit = np.flatnonzero(values >= w_star)
        if hit.size:
            n_star = int(ks[hit[0]])
            break
        previous = float(values[-1])
        start += block
        block *= 2
    if n_star is None:
        raise NumericalError(
            f"integer scan reached the cap {scan_cap} without W >= w*={w_star:.6g}; the supremum c appears to be below w*"
        )

    # binary search on [N* - 1, N*]
    lo, hi = float(n_star - 1), float(n_star)
    while hi - lo >= epsilon:
        mid = 0.5 * (lo + hi)
        if Ws(np.array([mid]))[0] >= w_star:
            hi = mid
        else:
            lo = mid
        logger.debug("cutoff bracket [%.8g, %.8g]", lo, hi)
    z_offset = hi

    probes = [float(n_star)]
    while probes[-1] * 2 <= scan_cap:
        probes.append(probes[-1] * 2)
    probes.append(float(scan_cap))
    c_hat = _c_hat(Ws(np.array(probes)), eta, epsilon)

    count = math.ceil(z_offset / epsilon)
    offsets = epsilon * np.arange(count + 1)
    evaluated = Ws(np.append(offsets, offsets[-1] + epsilon))
    evaluated[0] = evaluated[0] if np.isfinite(evaluated[0]) else 0.0
    w_values, extra = evaluated[:-1], float(evaluated[-1])
    values = _assemble(w_values, eta, epsilon, c_hat, extra)
    grid, values = _to_theta(offsets, values, theta0, side)
    z_star = theta0 + z_offset if side == "plus" else theta0 - z_offset
    logger.info("1d recipe: z*=%.6g N*=%d c_hat=%g nodes=%d", z_star, n_star, c_hat, len(grid))
    return GridDensity1D(theta0, grid, values, eta, delta, epsilon, c_hat, z_star, n_star)


def bounded_domain_variant(
    W: DistanceMap | Evaluator,
    domain: tuple[float, float],
    eta: float,
    epsilon: float,
    side: Side = "plus",
) -> GridDensity1D:
    """Mesh the whole bounded domain directly (no cutoff, delta = 0).

    The base point is domain[0] for ``side="plus"`` and domain[1] for
    ``side="minus"``. The grid stops early if W is not finite, in which case
    the supremum is treated as infinite.
    """
    _check_params(eta, epsilon)
    a, b = domain
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise DomainError(f"bounded_domain_variant needs a finite interval, got {domain}")
    theta0 = a if side == "plus" else b
    Ws = _oriented(_evaluator(W), theta0, side)
    width = b - a
    offsets = epsilon * np.arange(math.floor(width / epsilon) + 1)
    offsets = np.minimum(offsets, width)
    if width - offsets[-1] > 1e-9 * epsilon:
        offsets = np.append(offsets, width)
    else:
        offsets[-1] = width
    w_values = np.full(len(offsets), np.nan)
    truncated = False
    for start in range(0, len(offsets), 256):
        chunk = offsets[start : start + 256]
        try:
            w_values[start : start + 256] = Ws(chunk)
        except (DivergentIntegralError, DomainError):
            for i, s in enumerate(chunk):
                try:
                    w_values[start + i] = Ws(np.array([s]))[0]
                except (DivergentIntegralError, DomainError):
                    break
    bad = ~np.isfinite(w_values)
    bad[0] = False
    if bad.any():
        cut = int(np.argmax(bad))
        offsets, w_values = offsets[:cut], w_values[:cut]
        truncated = True
    if not np.isfinite(w_values[0]):
        w_values[0] = 0.0
    if len(offsets) < 2:
        raise NumericalError(f"W is not finite beyond the base point on {domain}")
    if np.any(np.diff(w_values) < 0):
        raise AssumptionViolationError("W is not increasing away from the base point")
    c_hat = math.inf if truncated else _c_hat(w_values, eta, epsilon)
    # uneven last step when the width is not a multiple of epsilon
    steps = np.diff(offsets)
    slopes = np.append(np.diff(w_values) / steps, np.diff(w_values)[-1] / steps[-1])
    values = np.abs(slopes) * eta * np.exp(-eta * w_values) / _truncation(c_hat, eta)
    grid, values = _to_theta(offsets, values, theta0, side)
    logger.info("1d bounded recipe: c_hat=%g nodes=%d truncated=%s", c_hat, len(grid), truncated)
    return GridDensity1D(theta0, grid, values, eta, 0.0, epsilon, c_hat, float(grid[-1] if side == "plus" else grid[0]))


def two_sided_prior_1d(
    W_minus: DistanceMap | Evaluator,
    W_plus: DistanceMap | Evaluator,
    theta0: float,
    eta_minus: float,
    eta_plus: float,
    delta: float,
    epsilon: float,
) -> GridDensity1D:
    """Run the one-sided recipe on both sides and mix with weights from c_hat."""
    left = approximate_prior_1d(W_minus, theta0, eta_minus, delta, epsilon, side="minus")
    right = approximate_prior_1d(W_plus, theta0, eta_plus, delta, epsilon, side="plus")
    z_minus = _truncation(left.c_hat, eta_minus)
    z_plus = _truncation(right.c_hat, eta_plus)
    w_minus, w_plus = z_minus / (z_minus + z_plus), z_plus / (z_minus + z_plus)
    centre = 0.5 * (w_minus * left.values[-1] + w_plus * right.values[0])
    grid = np.concatenate([left.grid[:-1], right.grid])
    values = np.concatenate([w_minus * left.values[:-1], [centre], w_plus * right.values[1:]])
    return GridDensity1D(theta0, grid, values, eta_plus, delta, epsilon, max(left.c_hat, right.c_hat))


# ---------------------------------------------------------------------------
# Total variation
# ---------------------------------------------------------------------------


def tv_1d(
    p: Callable[[np.ndarray], np.ndarray],
    q: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    n: int = 200_000,
    outside_mass: float = 0.0,
) -> float:
    """Half the L1 distance: midpoint rule on [lo, hi] plus mass known to lie outside."""
    if not hi > lo:
        raise DomainError(f"need hi > lo, got [{lo}, {hi}]")
    h = (hi - lo) / n
    x = lo + h * (np.arange(n) + 0.5)
    gap = np.abs(np.asarray(p(x), dtype=float) - np.asarray(q(x), dtype=float))
    return 0.5 * (float(gap.sum()) * h + outside_mass)


def tv_against_oracle(
    d: GridDensity1D,
    pdf: Callable[[np.ndarray], np.ndarray],
    tail_mass: Callable[[float], float],
    n: int = 200_000,
) -> float:
    """TV between a grid density and an analytic one-sided density.

    ``tail_mass(z)`` is the oracle's mass beyond the grid end z (away from
    the base point).
    """
    lo, hi = d.support
    far = hi if d.grid[0] == d.theta0 else lo
    return tv_1d(d, pdf, lo, hi, n=n, outside_mass=tail_mass(far))
