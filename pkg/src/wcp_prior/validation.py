"""Calibration of eta, normalization audits and pushforward checks."""

from __future__ import annotations

import logging
import math
import warnings
from typing import Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, optimize, stats

from .errors import AuditFailure, DomainError, InfeasibleTargetError
from .geometry import Polyline
from .multivariate import Box, MultivariatePrior
from .numeric1d import GridDensity1D
from .numeric2d import GridDensity2D
from .univariate import Direction, TailLaw, UnivariateFamily, UnivariatePrior, build_prior, exponential_tail, sample

logger = logging.getLogger(__name__)

ETA_RANGE = (1e-6, 1e6)
CALIBRATION_TOL = 1e-6
MIN_KS_SAMPLES = 50
PILOT_DRAWS = 4096

AuditMethod = Literal["auto", "quad", "monte_carlo"]


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


class CalibrationTarget(BaseModel):
    """P(theta > U) = alpha (``direction="above"``) or P(theta < U) = alpha."""

    model_config = ConfigDict(frozen=True)

    U: float
    alpha: float = Field(gt=0.0, lt=1.0)
    direction: Direction = "above"


class CalibrationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    U: float
    alpha: float
    direction: Direction
    law: TailLaw
    eta: float
    residual: float


def tail_probability_at(family: UnivariateFamily, target: CalibrationTarget, eta: float, law: TailLaw = "exponential") -> float:
    """Tail probability of ``target`` under the WCP prior of ``family`` at rate eta."""
    if law == "exponential":
        return exponential_tail(family, target.U, eta, eta, target.direction)
    return build_prior(family, eta, check=False).tail_probability(target.U, target.direction)


def calibrate_rate(
    tail: Callable[[float], float],
    alpha: float,
    eta_range: tuple[float, float] = ETA_RANGE,
    tol: float = CALIBRATION_TOL,
) -> float:
    """Solve tail(eta) = alpha by bisection in log(eta) over ``eta_range``."""
    lo, hi = eta_range
    if not 0 < lo < hi:
        raise DomainError(f"eta range must satisfy 0 < lo < hi, got {eta_range}")
    p_lo, p_hi = tail(lo), tail(hi)
    if p_lo == p_hi:
        raise InfeasibleTargetError(f"tail probability does not depend on eta (constant {p_lo:.6g})")
    if not min(p_lo, p_hi) <= alpha <= max(p_lo, p_hi):
        raise InfeasibleTargetError(
            f"alpha={alpha} is unreachable: tail probability ranges over [{min(p_lo, p_hi):.6g}, {max(p_lo, p_hi):.6g}] "
            f"for eta in [{lo:g}, {hi:g}]"
        )
    log_eta = optimize.bisect(lambda s: tail(math.exp(s)) - alpha, math.log(lo), math.log(hi), xtol=1e-14, maxiter=400)
    eta = math.exp(log_eta)
    residual = abs(tail(eta) - alpha)
    if residual >= tol:
        raise InfeasibleTargetError(f"calibration stalled at eta={eta:.6g} with residual {residual:.3g}")
    logger.debug("calibrated eta=%.10g residual=%.3g", eta, residual)
    return eta


def calibrate_eta(
    family: UnivariateFamily,
    target: CalibrationTarget,
    law: TailLaw = "exponential",
    eta_range: tuple[float, float] = ETA_RANGE,
    tol: float = CALIBRATION_TOL,
) -> float:
    """The rate eta with P(theta beyond U) = alpha under the family's WCP prior.

    ``law="exponential"`` uses P(W > w) = exp(-eta w); ``law="truncated"``
    conditions the exponential on [0, c].
    """
    lo, hi = family.domain
    if not lo <= target.U <= hi:
        raise DomainError(f"threshold U={target.U} lies outside the domain [{lo}, {hi}] of '{family.label}'")
    if target.U == family.theta0:
        raise InfeasibleTargetError(f"threshold U={target.U} is the base model of '{family.label}'")
    eta = calibrate_rate(lambda e: tail_probability_at(family, target, e, law), target.alpha, eta_range, tol)
    logger.info("calibrate '%s': U=%g alpha=%g law=%s eta=%.6g", family.label, target.U, target.alpha, law, eta)
    return eta


def calibrate(family: UnivariateFamily, target: CalibrationTarget, law: TailLaw = "exponential") -> CalibrationResult:
    eta = calibrate_eta(family, target, law)
    residual = abs(tail_probability_at(family, target, eta, law) - target.alpha)
    return CalibrationResult(
        family=family.label,
        U=target.U,
        alpha=target.alpha,
        direction=target.direction,
        law=law,
        eta=eta,
        residual=residual,
    )


def grid_tail_probability(d: GridDensity1D, U: float, direction: Direction = "above", normalize: bool = True) -> float:
    """Tail mass of a grid density, optionally relative to its total mass."""
    mass = d.tail_probability(U, direction)
    return mass / d.integral() if normalize else mass


# ---------------------------------------------------------------------------
# Normalization audits
# ---------------------------------------------------------------------------


class AuditReport(BaseModel):
    """Integral of a density and whether it is within tolerance of the target."""

    integral: float
    target: float = 1.0
    tolerance: float
    passed: bool
    method: str
    stderr: float | None = None
    loss: float | None = None
    budget: float | None = None
    partial_sums: list[float] = Field(default_factory=list)


def _quad_pieces(fn: Callable[[float], float], cuts: list[float], tolerance: float) -> tuple[float, list[float]]:
    partial, total = [], 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if not b > a:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            value, err = integrate.quad(fn, a, b, limit=200, epsabs=min(1e-12, tolerance / 10), epsrel=1e-12)
        total += value
        partial.append(total)
        if not math.isfinite(value) or err > tolerance:
            raise AuditFailure(f"integral over [{a:g}, {b:g}] did not converge (estimate {value:.6g}, error {err:.3g})", partial)
    return total, partial


def _audit_univariate(prior: UnivariatePrior, tolerance: float) -> AuditReport:
    lo, hi = prior.domain
    inner = sorted({float(q) for q in prior.quantile([1e-3, 0.5, 1.0 - 1e-3]) if math.isfinite(q)})
    cuts = [lo] + [q for q in inner if lo < q < hi] + [hi]
    if math.isfinite(prior.theta0) and lo < prior.theta0 < hi and prior.theta0 not in cuts:
        cuts = sorted(cuts + [prior.theta0])
    total, partial = _quad_pieces(lambda x: float(prior.density(x)), cuts, tolerance)
    return AuditReport(integral=total, tolerance=tolerance, passed=abs(total - 1.0) <= tolerance, method="quad", partial_sums=partial)


def _proposal(region: Box, scales: np.ndarray) -> list:
    """One scipy.stats law per coordinate covering its interval."""
    laws = []
    for (lo, hi), scale in zip(region, scales):
        if math.isfinite(lo) and math.isfinite(hi):
            laws.append(stats.uniform(loc=lo, scale=hi - lo))
        elif math.isfinite(lo):
            laws.append(stats.expon(loc=lo, scale=scale))
        elif math.isfinite(hi):
            laws.append(_Mirrored(stats.expon(loc=-hi, scale=scale)))
        else:
            laws.append(stats.cauchy(loc=0.0, scale=scale))
    return laws


class _Mirrored:
    """Law of -X for a frozen scipy.stats law X."""

    def __init__(self, law) -> None:
        self.law = law

    def rvs(self, size, random_state):
        return -self.law.rvs(size=size, random_state=random_state)

    def pdf(self, x):
        return self.law.pdf(-np.asarray(x))


def _pilot_scales(prior: MultivariatePrior, rng: np.random.Generator) -> np.ndarray:
    if prior.sampler is None:
        return np.ones(prior.dimension)
    draws = prior.sample(rng, PILOT_DRAWS)
    scales = []
    for column, (lo, hi) in zip(draws.T, prior.region):
        anchor = lo if math.isfinite(lo) else hi if math.isfinite(hi) else 0.0
        scales.append(max(2.0 * float(np.mean(np.abs(column - anchor))), 1e-6))
    return np.asarray(scales)


def _audit_monte_carlo(prior: MultivariatePrior, tolerance: float, n: int, seed: int) -> AuditReport:
    """Importance sampling over a per-coordinate box proposal.

    With an exact sampler, half the points come from the prior itself and
    the weights use the balanced mixture 0.5 pi + 0.5 q, which keeps them
    below 2.
    """
    rng = np.random.default_rng(seed)
    laws = _proposal(prior.region, _pilot_scales(prior, rng))

    def box_density(points: np.ndarray) -> np.ndarray:
        out = np.ones(len(points))
        for j, law in enumerate(laws):
            out *= law.pdf(points[:, j])
        return out

    n_box = n if prior.sampler is None else n // 2
    box = np.column_stack([law.rvs(size=n_box, random_state=rng) for law in laws])
    points = box if prior.sampler is None else np.vstack([prior.sample(rng, n - n_box), box])
    values = prior.at_points(points)
    q = box_density(points)
    if prior.sampler is None:
        weights = np.where(q > 0, values / np.where(q > 0, q, 1.0), 0.0)
        method = "monte_carlo:box"
    else:
        weights = values / (0.5 * values + 0.5 * q)
        method = "monte_carlo:mixture"
    integral = float(np.mean(weights))
    stderr = float(np.std(weights, ddof=1) / math.sqrt(len(weights)))
    if not math.isfinite(integral):
        raise AuditFailure(f"Monte Carlo estimate for '{prior.label}' is not finite", [integral])
    return AuditReport(
        integral=integral,
        tolerance=tolerance,
        passed=abs(integral - 1.0) <= tolerance,
        method=method,
        stderr=stderr,
        partial_sums=[integral],
    )


def _audit_nquad(density: Callable[..., np.ndarray], region: Box, tolerance: float) -> AuditReport:
    def integrand(*x):
        return float(density(*x))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.nquad(integrand, list(region), opts={"limit": 200, "epsabs": min(1e-10, tolerance / 10)})
    if not math.isfinite(value) or err > tolerance:
        raise AuditFailure(f"nested quadrature did not converge (estimate {value:.6g}, error {err:.3g})", [value])
    return AuditReport(integral=value, tolerance=tolerance, passed=abs(value - 1.0) <= tolerance, method="quad", partial_sums=[value])


def normalization_audit(
    prior,
    tolerance: float | None = None,
    method: AuditMethod = "auto",
    domain: Box | None = None,
    n: int = 10**6,
    seed: int = 0,
    mesh_constant: float = 1.0,
) -> AuditReport:
    """Integrate a density and compare with its expected mass.

    Closed-form priors should integrate to 1: univariate ones by adaptive
    quadrature (tolerance 1e-8), multivariate ones by nested quadrature
    (1e-6) or importance sampling (5e-3, the default from three
    dimensions on). Grid densities lose mass to the cutoffs; their report
    carries the loss and passes when it is within delta + C eps (1D) or
    3 delta / 2 + tau + C eps (2D), C = ``mesh_constant``. Plain callables
    need ``domain`` and go through quadrature.
    """
    if isinstance(prior, GridDensity1D):
        integral = prior.integral()
        budget = prior.delta + mesh_constant * prior.epsilon
        return _grid_report(integral, budget, "grid")
    if isinstance(prior, GridDensity2D):
        integral = prior.integral()
        cfg = prior.config
        budget = 1.5 * cfg.delta + cfg.tau + mesh_constant * cfg.eps
        return _grid_report(integral, budget, "mesh")
    if isinstance(prior, UnivariatePrior):
        return _audit_univariate(prior, 1e-8 if tolerance is None else tolerance)
    if isinstance(prior, MultivariatePrior):
        chosen = method
        if chosen == "auto":
            chosen = "quad" if prior.dimension <= 2 else "monte_carlo"
        if chosen == "monte_carlo":
            report = _audit_monte_carlo(prior, 5e-3 if tolerance is None else tolerance, n, seed)
        else:
            report = _audit_nquad(prior, prior.region, 1e-6 if tolerance is None else tolerance)
        logger.info("audit '%s': integral=%.8f method=%s", prior.label, report.integral, report.method)
        return report
    if callable(prior):
        if domain is None:
            raise DomainError("a plain density needs an integration domain")
        tolerance = 1e-8 if tolerance is None else tolerance
        if len(domain) == 1:
            lo, hi = domain[0]
            total, partial = _quad_pieces(lambda x: float(prior(x)), [lo, hi], tolerance)
            return AuditReport(integral=total, tolerance=tolerance, passed=abs(total - 1.0) <= tolerance, method="quad", partial_sums=partial)
        return _audit_nquad(prior, domain, tolerance)
    raise DomainError(f"cannot audit an object of type {type(prior).__name__}")


def _grid_report(integral: float, budget: float, method: str) -> AuditReport:
    loss = 1.0 - integral
    return AuditReport(
        integral=integral,
        tolerance=budget,
        passed=abs(loss) <= budget,
        method=method,
        loss=loss,
        budget=budget,
        partial_sums=[integral],
    )


# ---------------------------------------------------------------------------
# Pushforward checks
# ---------------------------------------------------------------------------


def _distance_law(eta: float, c: float):
    if math.isinf(c):
        return stats.expon(scale=1.0 / eta)
    return stats.truncexpon(b=eta * c, scale=1.0 / eta)


def pushforward_check(
    prior: UnivariatePrior | MultivariatePrior,
    distance=None,
    n: int = 10_000,
    seed: int = 0,
    eta: float | None = None,
    c: float | None = None,
) -> float:
    """KS statistic between W(theta), theta ~ prior, and the truncated Exp(eta) on [0, c].

    Returns NaN (and logs a warning) below 50 samples.
    """
    if n < MIN_KS_SAMPLES:
        logger.warning("pushforward check skipped: n=%d is below %d samples", n, MIN_KS_SAMPLES)
        return math.nan
    rng = np.random.default_rng(seed)
    if isinstance(prior, UnivariatePrior):
        draws = sample(prior, rng, n)
        values = np.asarray(prior.distance(draws) if distance is None else distance(draws), dtype=float)
        if eta is None:
            if prior.family.minus is not None and prior.family.plus is not None and prior.eta_minus != prior.eta_plus:
                raise DomainError("pushforward check needs a single eta; the two sides of this prior differ")
            eta = prior.eta_plus if prior.family.plus is not None else prior.eta_minus
        if c is None:
            c = prior.c_plus if prior.family.plus is not None else prior.c_minus
    else:
        draws = prior.sample(rng, n)
        distance = prior.distance if distance is None else distance
        if distance is None:
            raise DomainError(f"prior '{prior.label}' carries no distance map")
        values = np.asarray(distance(*draws.T), dtype=float)
        eta = prior.eta if eta is None else eta
        c = distance.supremum_c if c is None else c
    law = _distance_law(eta, c)
    statistic = float(stats.kstest(values, law.cdf).statistic)
    logger.debug("pushforward KS=%.4g (n=%d eta=%g c=%g)", statistic, n, eta, c)
    return statistic


def uniformity_check(values, lo: float = 0.0, hi: float = 1.0) -> float:
    """KS statistic of ``values`` against U(lo, hi)."""
    values = np.asarray(values, dtype=float)
    if values.size < MIN_KS_SAMPLES:
        logger.warning("uniformity check skipped: %d values", values.size)
        return math.nan
    return float(stats.kstest(values, stats.uniform(loc=lo, scale=hi - lo).cdf).statistic)


def level_curve_uniformity(curve: Polyline, n: int = 1000, seed: int = 0, method="trapezoid") -> float:
    """Uniform points along a polyline, mapped through u1 / l, tested against U(0, 1).

    Points are placed on a segment with probability proportional to its
    length; u1 is the partial arc length up to the point along the curve,
    so the orientation of the polyline does not matter.
    """
    pts = curve.points
    if len(pts) < 2:
        logger.warning("level curve has fewer than 2 points; uniformity check skipped")
        return math.nan
    rng = np.random.default_rng(seed)
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    segment = rng.choice(len(chords), size=n, p=chords / chords.sum())
    t = rng.random(n)
    lengths = curve.partial_lengths(method)
    seg_len = np.diff(lengths)
    u = (lengths[segment] + t * seg_len[segment]) / lengths[-1]
    return uniformity_check(u)
