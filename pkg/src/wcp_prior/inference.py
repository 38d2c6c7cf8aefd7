"""Data generators, likelihoods and repeated-simulation MAP studies.

Every replicate draws its data from its own generator, spawned from the
study seed with ``numpy.random.SeedSequence(seed).spawn(replicates)``; all
priors of a study see the same replicate data.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize, stats

from .config import OptimizerConfig, PriorSpec, StudyConfig, worker_count
from .errors import ConfigurationError, DegenerateDataError, DomainError
from .multivariate import bivariate_gaussian_prior, bivariate_gpd_prior, gaussian_two_step_prior, gpd_two_step_prior
from .univariate import ar1_family, build_prior
from .validation import CalibrationTarget, calibrate_eta

logger = logging.getLogger(__name__)

LogFn = Callable[..., np.ndarray]
Bounds = list[tuple[float, float]]

PARAM_NAMES = {"ar1": ("phi",), "gaussian_2d": ("m", "sigma"), "gpd_2d": ("sigma", "xi")}
GAUSSIAN_2D_TRUTHS = ((0.0, 0.5), (0.25, 0.433), (0.433, 0.25))
GPD_2D_TRUTHS = ((0.2, 1.0 / 3.0), (0.1, 2.0 / 3.0))
DEFAULT_WCP_ETA = {"gaussian_2d": 10.0, "gpd_2d": 10.0}
AR1_TARGET = CalibrationTarget(U=0.9, alpha=0.9, direction="above")
EDGE = 1e-9
PENALTY = 1e300


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


def simulate_ar1(phi: float, sigma: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1): X_0 ~ N(0, sigma^2), innovations N(0, sigma^2 (1 - phi^2))."""
    if abs(phi) > 1:
        raise DomainError(f"|phi| must be <= 1, got {phi}")
    if sigma <= 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    x0 = rng.normal(0.0, sigma)
    innovations = rng.normal(0.0, sigma * math.sqrt(max(1.0 - phi * phi, 0.0)), size=n - 1)
    out = np.empty(n)
    out[0] = x0
    for t in range(1, n):
        out[t] = phi * out[t - 1] + innovations[t - 1]
    return out


def simulate_gaussian(m: float, sigma: float, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(m, sigma, size=n)


def simulate_gpd(sigma: float, xi: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse transform through the GPD quantile sigma / xi ((1 - u)^(-xi) - 1)."""
    if sigma <= 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    return stats.genpareto.ppf(rng.random(n), c=xi, scale=sigma)


# ---------------------------------------------------------------------------
# Likelihoods (vectorized over parameter arrays)
# ---------------------------------------------------------------------------


def ar1_loglik(x: np.ndarray, sigma: float) -> LogFn:
    """Exact stationary log-likelihood in phi with the marginal sd sigma known."""
    x = np.asarray(x, dtype=float)
    lead, lag = x[1:], x[:-1]
    head = stats.norm.logpdf(x[0], scale=sigma)

    def loglik(phi):
        phi = np.asarray(phi, dtype=float)
        var = sigma**2 * (1.0 - phi**2)
        resid = lead - phi[..., None] * lag
        sq = np.sum(resid**2, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            body = -0.5 * (len(lead) * np.log(2.0 * math.pi * var) + sq / var)
        return np.where(var > 0, head + body, -np.inf)

    return loglik


def gaussian_loglik(x: np.ndarray) -> LogFn:
    x = np.asarray(x, dtype=float)

    def loglik(m, s):
        m, s = np.broadcast_arrays(np.asarray(m, dtype=float), np.asarray(s, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            values = stats.norm.logpdf(x, loc=m[..., None], scale=s[..., None]).sum(axis=-1)
        return np.where(s > 0, values, -np.inf)

    return loglik


def gpd_loglik(x: np.ndarray) -> LogFn:
    x = np.asarray(x, dtype=float)

    def loglik(s, xi):
        s, xi = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(xi, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            values = stats.genpareto.logpdf(x, c=xi[..., None], scale=s[..., None]).sum(axis=-1)
        return np.where(s > 0, values, -np.inf)

    return loglik


# ---------------------------------------------------------------------------
# MAP estimation
# ---------------------------------------------------------------------------


def map_estimate(loglik: LogFn, logprior: LogFn, bounds: Bounds, optimizer: OptimizerConfig | None = None) -> np.ndarray:
    """Maximizer of loglik + logprior over a box.

    A grid of ``grid_size`` points per axis locates the best cell; 1D then
    polishes with bounded Brent search, 2D with bounded Nelder-Mead, both to
    ``tol``.
    """
    optimizer = optimizer or OptimizerConfig()
    dim = len(bounds)
    axes = [np.linspace(lo, hi, optimizer.grid_size) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    with np.errstate(all="ignore"):
        values = np.asarray(loglik(*mesh), dtype=float) + np.asarray(logprior(*mesh), dtype=float)
    values = np.where(np.isnan(values), -np.inf, values)
    if not np.any(np.isfinite(values)) or np.max(values) == -np.inf:
        raise DegenerateDataError("log posterior is -inf on the whole search grid")
    best = np.unravel_index(int(np.argmax(values)), values.shape)
    start = np.array([axis[i] for axis, i in zip(axes, best)])

    def negative(theta) -> float:
        theta = np.atleast_1d(theta)
        with np.errstate(all="ignore"):
            value = float(np.asarray(loglik(*theta)) + np.asarray(logprior(*theta)))
        return -value if math.isfinite(value) else PENALTY

    if dim == 1:
        i = best[0]
        lo = axes[0][max(i - 1, 0)]
        hi = axes[0][min(i + 1, len(axes[0]) - 1)]
        result = optimize.minimize_scalar(negative, bounds=(lo, hi), method="bounded", options={"xatol": optimizer.tol})
        candidate = np.array([result.x])
    else:
        result = optimize.minimize(
            negative,
            start,
            method="Nelder-Mead",
            bounds=bounds,
            options={"xatol": optimizer.tol, "fatol": 1e-10, "maxiter": 4000},
        )
        candidate = np.asarray(result.x, dtype=float)
    return candidate if negative(candidate) <= negative(start) else start


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorChoice:
    key: str
    logprior: LogFn
    meta: dict = field(default_factory=dict)


def _flat(*theta) -> np.ndarray:
    return np.zeros(np.broadcast(*theta).shape)


def _ar1_prior(spec: PriorSpec, config: StudyConfig) -> PriorChoice:
    n, sigma = config.n_obs, config.sigma
    if spec.name == "uniform":
        return PriorChoice(spec.key, lambda phi: np.full(np.shape(phi), -math.log(2.0)))
    if spec.name == "two_step":
        raise ConfigurationError("model 'ar1' has a single parameter; a two_step prior does not apply")
    family = ar1_family(n, sigma)
    eta = spec.eta if spec.eta is not None else calibrate_eta(family, AR1_TARGET)
    prior = build_prior(family, eta)
    return PriorChoice(spec.key, prior.log_density, {"eta": eta})


def _bivariate_prior(spec: PriorSpec, config: StudyConfig) -> PriorChoice:
    if spec.name == "uniform":
        return PriorChoice(spec.key, _flat)
    if spec.name == "two_step":
        build = gaussian_two_step_prior if config.model == "gaussian_2d" else gpd_two_step_prior
        prior = build(spec.eta1, spec.eta2)
        return PriorChoice(spec.key, prior.log_density, {"eta1": spec.eta1, "eta2": spec.eta2})
    eta = spec.eta if spec.eta is not None else DEFAULT_WCP_ETA[config.model]
    prior = bivariate_gaussian_prior(eta) if config.model == "gaussian_2d" else bivariate_gpd_prior(eta)
    return PriorChoice(spec.key, prior.log_density, {"eta": eta})


def build_priors(config: StudyConfig) -> list[PriorChoice]:
    make = _ar1_prior if config.model == "ar1" else _bivariate_prior
    choices = [make(spec, config) for spec in config.priors]
    keys = [c.key for c in choices]
    if len(set(keys)) != len(keys):
        raise ConfigurationError(f"prior labels must be unique, got {keys}")
    return choices


def _simulate(config: StudyConfig, rng: np.random.Generator) -> np.ndarray:
    if config.model == "ar1":
        return simulate_ar1(config.true_params[0], config.sigma, config.n_obs, rng)
    if config.model == "gaussian_2d":
        m, s = config.true_params
        return simulate_gaussian(m, s, config.n_obs, rng)
    s, xi = config.true_params
    return simulate_gpd(s, xi, config.n_obs, rng)


def _likelihood(config: StudyConfig, data: np.ndarray) -> LogFn:
    if config.model == "ar1":
        return ar1_loglik(data, config.sigma)
    return gaussian_loglik(data) if config.model == "gaussian_2d" else gpd_loglik(data)


def search_bounds(config: StudyConfig, data: np.ndarray) -> Bounds:
    """The optimizer's box: configured bounds, else a data-driven default."""
    if config.optimizer.bounds is not None:
        return [tuple(b) for b in config.optimizer.bounds]
    if config.model == "ar1":
        return [(-1.0 + EDGE, 1.0 - EDGE)]
    spread = float(np.std(data)) + 1e-3
    if config.model == "gaussian_2d":
        centre = float(np.mean(data))
        return [(centre - 4.0 * spread, centre + 4.0 * spread), (1e-4, 4.0 * spread)]
    return [(1e-4, 4.0 * spread), (0.0, 1.0 - 1e-3)]


@dataclass(frozen=True)
class StudyResult:
    config: StudyConfig
    rows: list[dict]
    summary: dict
    runtime_ms: float = field(default=0.0, compare=False)

    def estimates(self, key: str) -> np.ndarray:
        names = PARAM_NAMES[self.config.model]
        return np.array([[row[name] for name in names] for row in self.rows if row["prior"] == key])


def summarize(estimates: np.ndarray) -> dict:
    """Median and IQR per parameter; 2D clouds add covariance eigenvalues and their ratio."""
    q1, median, q3 = np.percentile(estimates, [25, 50, 75], axis=0)
    out = {"median": median.tolist(), "iqr": (q3 - q1).tolist()}
    if estimates.shape[1] == 2 and len(estimates) > 2:
        eig = np.linalg.eigvalsh(np.cov(estimates.T))
        out["eigenvalues"] = eig.tolist()
        out["eigen_ratio"] = float(eig[-1] / eig[0]) if eig[0] > 0 else math.inf
    return out


def run_study(config: StudyConfig, workers: int | None = None) -> StudyResult:
    """One row per (replicate, prior), sorted by replicate then prior order."""
    started = time.perf_counter()
    priors = build_priors(config)
    names = PARAM_NAMES[config.model]
    replicates = config.effective_replicates
    streams = np.random.SeedSequence(config.seed).spawn(replicates)

    def one(index: int) -> list[dict]:
        rng = np.random.default_rng(streams[index])
        data = _simulate(config, rng)
        loglik = _likelihood(config, data)
        bounds = search_bounds(config, data)
        rows = []
        for choice in priors:
            estimate = map_estimate(loglik, choice.logprior, bounds, config.optimizer)
            row = {"replicate": index, "prior": choice.key}
            row.update({name: float(value) for name, value in zip(names, estimate)})
            rows.append(row)
        return rows

    workers = worker_count() if workers is None else max(1, workers)
    if workers == 1:
        per_replicate = [one(i) for i in range(replicates)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_replicate = list(pool.map(one, range(replicates)))
    rows = [row for block in per_replicate for row in block]
    summary = {}
    for choice in priors:
        stats_ = summarize(np.array([[row[n] for n in names] for row in rows if row["prior"] == choice.key]))
        stats_.update(choice.meta)
        summary[choice.key] = stats_
    runtime = 1000.0 * (time.perf_counter() - started)
    logger.info("study %s: n=%d replicates=%d priors=%d in %.0f ms", config.model, config.n_obs, replicates, len(priors), runtime)
    return StudyResult(config, rows, summary, runtime)
