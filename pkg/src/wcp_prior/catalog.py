"""Registry of named prior families shared by the CLI, the MCP tools and the goldens."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy import integrate

from .config import GridConfig2D
from .errors import ConfigurationError
from .geometry import TriMesh
from .io import table_integral
from .multivariate import (
    Box,
    MultivariatePrior,
    bivariate_gaussian_prior,
    bivariate_gpd_prior,
    gaussian_2d_distance,
    gaussian_cov_distance,
    gaussian_two_step_prior,
    gpd_2d_distance,
    gpd_two_step_prior,
    recipe2_trivariate_gaussian_cov,
)
from .numeric1d import GridDensity1D, bounded_domain_variant
from .numeric2d import GridDensity2D, approximate_density_2d
from .univariate import (
    UnivariateFamily,
    UnivariatePrior,
    ar1_family,
    ar1_phi_prior,
    gaussian_mean_prior,
    gaussian_precision_prior,
    gaussian_sd_prior,
    gpd_family,
    gpd_tail_prior,
    mean_family,
    precision_family,
    sd_family,
    t_family,
)

REQUIRED = object()


@dataclass(frozen=True)
class Hyperparameter:
    name: str
    default: Any = REQUIRED
    integer: bool = False

    @property
    def required(self) -> bool:
        return self.default is REQUIRED


@dataclass(frozen=True)
class NumericSetup:
    """What the bivariate numerical recipe needs for a family: W and the domain settings."""

    distance: Callable[[], Any]
    domain: str
    cone_angle: float = math.pi / 2
    y_range: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    dimension: int
    hyperparameters: tuple[Hyperparameter, ...]
    build: Callable[[dict], Any]
    distance: Callable[[dict], Callable[..., Any]]
    golden: dict
    box: Callable[[dict], Box] | None = None
    numeric: NumericSetup | None = None
    family: Callable[[dict], UnivariateFamily] | None = None
    description: str = ""
    derivation: str = ""

    def resolve(self, given: dict[str, float] | None) -> dict[str, float]:
        """Fill defaults and reject unknown or missing hyperparameters."""
        given = dict(given or {})
        known = {h.name for h in self.hyperparameters}
        unknown = sorted(set(given) - known)
        if unknown:
            raise ConfigurationError(f"family '{self.name}' does not take {unknown}; expected {sorted(known)}")
        out = {}
        for h in self.hyperparameters:
            if h.name in given and given[h.name] is not None:
                value = given[h.name]
                out[h.name] = int(value) if h.integer else float(value)
            elif h.required:
                raise ConfigurationError(f"family '{self.name}' requires hyperparameter '{h.name}'")
            else:
                out[h.name] = h.default
        return out

    def with_unit_rates(self, given: dict[str, float] | None) -> dict[str, float]:
        """``given`` with every unset rate at 1, for evaluating W where the rate plays no role."""
        out = dict(given or {})
        for h in self.hyperparameters:
            if h.name.startswith("eta") and h.required:
                out.setdefault(h.name, 1.0)
        return out


def _eta(hp: dict) -> float:
    return hp["eta"]


def _t_prior(hp: dict):
    return bounded_domain_variant(t_family().plus, (0.0, 0.5), hp["eta"], hp["eps"])


CATALOG: dict[str, CatalogEntry] = {
    entry.name: entry
    for entry in (
        CatalogEntry(
            name="precision",
            dimension=1,
            hyperparameters=(Hyperparameter("eta"),),
            build=lambda hp: gaussian_precision_prior(_eta(hp)),
            distance=lambda hp: precision_family().distance,
            family=lambda hp: precision_family(),
            golden={"eta": 1.0},
            description="Gaussian precision tau, base tau = inf",
            derivation="W2 = tau^(-1/2); type-2 Gumbel 0.5 tau^(-3/2) eta exp(-eta tau^(-1/2))",
        ),
        CatalogEntry(
            name="mean",
            dimension=1,
            hyperparameters=(Hyperparameter("eta"), Hyperparameter("eta_plus", default=None)),
            build=lambda hp: gaussian_mean_prior(hp["eta"], hp["eta_plus"]),
            distance=lambda hp: mean_family().distance,
            family=lambda hp: mean_family(),
            golden={"eta": 1.0, "eta_plus": None},
            description="Gaussian mean with fixed variance, base m = 0",
            derivation="W2 = |m|; two-sided Laplace with side weights from the side masses",
        ),
        CatalogEntry(
            name="sd",
            dimension=1,
            hyperparameters=(Hyperparameter("eta"),),
            build=lambda hp: gaussian_sd_prior(_eta(hp)),
            distance=lambda hp: sd_family().distance,
            family=lambda hp: sd_family(),
            golden={"eta": 1.0},
            description="Gaussian standard deviation, base sigma = 0",
            derivation="W2 = sigma; Exp(eta)",
        ),
        CatalogEntry(
            name="ar1",
            dimension=1,
            hyperparameters=(Hyperparameter("eta"), Hyperparameter("n", integer=True), Hyperparameter("sigma", default=1.0)),
            build=lambda hp: ar1_phi_prior(hp["eta"], hp["n"], hp["sigma"]),
            distance=lambda hp: ar1_family(hp["n"], hp["sigma"]).distance,
            family=lambda hp: ar1_family(hp["n"], hp["sigma"]),
            golden={"eta": 13.44, "n": 10, "sigma": 0.1},
            description="AR(1) coefficient, base phi = 1",
            derivation="W2 = sqrt(2 sigma^2 (n - f(phi; n) / (1 - phi))), truncated at c = W2(-1)",
        ),
        CatalogEntry(
            name="gpd-tail",
            dimension=1,
            hyperparameters=(Hyperparameter("eta"),),
            build=lambda hp: gpd_tail_prior(_eta(hp)),
            distance=lambda hp: gpd_family().distance,
            family=lambda hp: gpd_family(),
            golden={"eta": 4.60517},
            description="GPD tail index xi, base xi = 0",
            derivation="W1 = xi / (1 - xi); eta / (1 - xi)^2 exp(-eta xi / (1 - xi))",
        ),
        CatalogEntry(
            name="t-tail",
            dimension=1,
            hyperparameters=(Hyperparameter("eta"), Hyperparameter("eps", default=0.005)),
            build=_t_prior,
            distance=lambda hp: t_family().distance,
            family=lambda hp: t_family(),
            golden={"eta": 6.0, "eps": 0.01},
            description="Student-t with xi = 1 / nu against N(0, 1) (numerical grid)",
            derivation="W2 by quantile quadrature; grid recipe on the bounded domain [0, 1/2)",
        ),
        CatalogEntry(
            name="gaussian-2d",
            dimension=2,
            hyperparameters=(Hyperparameter("eta"),),
            build=lambda hp: bivariate_gaussian_prior(_eta(hp)),
            distance=lambda hp: gaussian_2d_distance(),
            golden={"eta": 10.0},
            box=lambda hp: ((-5.0 / hp["eta"], 5.0 / hp["eta"]), (0.0, 5.0 / hp["eta"])),
            numeric=NumericSetup(gaussian_2d_distance, "conic", cone_angle=math.pi),
            description="Gaussian (m, sigma) against the Dirac at 0",
            derivation="W2 = sqrt(m^2 + sigma^2); eta exp(-eta r) / (pi r)",
        ),
        CatalogEntry(
            name="gpd-2d",
            dimension=2,
            hyperparameters=(Hyperparameter("eta"),),
            build=lambda hp: bivariate_gpd_prior(_eta(hp)),
            distance=lambda hp: gpd_2d_distance(),
            golden={"eta": 20.0},
            box=lambda hp: ((0.0, 5.0 / hp["eta"]), (0.0, 1.0)),
            numeric=NumericSetup(gpd_2d_distance, "product", y_range=(0.0, 1.0)),
            description="GPD (sigma, xi) against the Dirac at 0",
            derivation="W1 = sigma / (1 - xi); eta / (1 - xi) exp(-eta sigma / (1 - xi))",
        ),
        CatalogEntry(
            name="gaussian-cov-3d",
            dimension=3,
            hyperparameters=(Hyperparameter("eta"),),
            build=lambda hp: recipe2_trivariate_gaussian_cov(_eta(hp)),
            distance=lambda hp: gaussian_cov_distance(),
            golden={"eta": 1.0},
            box=lambda hp: ((0.0, 5.0 / hp["eta"]), (0.0, 5.0 / hp["eta"]), (-1.0, 1.0)),
            description="Bivariate centred Gaussian (sigma1, sigma2, rho) against the Dirac at 0",
            derivation="W2 = sqrt(sigma1^2 + sigma2^2); eta exp(-eta r) / (pi r), flat in rho",
        ),
        CatalogEntry(
            name="gaussian-two-step",
            dimension=2,
            hyperparameters=(Hyperparameter("eta1"), Hyperparameter("eta2")),
            build=lambda hp: gaussian_two_step_prior(hp["eta1"], hp["eta2"]).as_prior(
                gaussian_2d_distance().domain, gaussian_2d_distance()
            ),
            distance=lambda hp: gaussian_2d_distance(),
            golden={"eta1": 46.0517, "eta2": 46.0517},
            box=lambda hp: ((-5.0 / hp["eta1"], 5.0 / hp["eta1"]), (0.0, 5.0 / hp["eta2"])),
            description="Two-step Gaussian prior: Laplace on m times Exp on sigma",
            derivation="(1/2) eta1 eta2 exp(-eta1 |m| - eta2 sigma)",
        ),
        CatalogEntry(
            name="gpd-two-step",
            dimension=2,
            hyperparameters=(Hyperparameter("eta1"), Hyperparameter("eta2")),
            build=lambda hp: gpd_two_step_prior(hp["eta1"], hp["eta2"]).as_prior(gpd_2d_distance().domain, gpd_2d_distance()),
            distance=lambda hp: gpd_2d_distance(),
            golden={"eta1": 10.0, "eta2": 10.0},
            box=lambda hp: ((0.0, 5.0 / hp["eta1"]), (0.0, 1.0)),
            description="Two-step GPD prior: Exp on sigma times the xi prior",
            derivation="eta1 eta2 exp(-eta1 sigma - eta2 xi / (1 - xi)) / (1 - xi)^2",
        ),
    )
}


def get_entry(name: str) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise ConfigurationError(f"unknown family '{name}'; choose from {sorted(CATALOG)}") from None


def evaluate_distance(name: str, params, hyperparameters: dict | None = None) -> float:
    """W at one parameter point of a catalog family."""
    entry = get_entry(name)
    hp = entry.resolve(hyperparameters)
    params = [float(p) for p in np.atleast_1d(params)]
    if len(params) != entry.dimension:
        raise ConfigurationError(f"family '{name}' takes {entry.dimension} parameters, got {len(params)}")
    fn = entry.distance(hp)
    value = fn(np.array([params[0]])) if entry.dimension == 1 else fn(*(np.array([p]) for p in params))
    return float(np.asarray(value, dtype=float).ravel()[0])


# ---------------------------------------------------------------------------
# Density tables
# ---------------------------------------------------------------------------

TABLE_POINTS = {1: 1000, 2: 50, 3: 20}
U_EDGE = 1e-9


@dataclass(frozen=True)
class DensityTable:
    header: list[str]
    rows: np.ndarray
    provenance: dict
    mesh: TriMesh | None = None
    source: GridDensity2D | None = None

    @property
    def normalization(self) -> float:
        return table_integral(self.header, self.rows, self.mesh)


def numeric_config(name: str, hyperparameters: dict | None = None, **settings) -> GridConfig2D:
    """Recipe settings for a family with a numerical bivariate construction."""
    entry = get_entry(name)
    if entry.numeric is None:
        raise ConfigurationError(f"family '{name}' has no numerical bivariate construction")
    hp = entry.resolve(hyperparameters)
    setup = entry.numeric
    settings = {k: v for k, v in settings.items() if v is not None}
    return GridConfig2D(
        eta=hp["eta"], domain=setup.domain, cone_angle=setup.cone_angle, y_range=setup.y_range, **settings
    )


def _univariate_rows(prior: UnivariatePrior, n: int) -> np.ndarray:
    lo, hi = prior.domain
    u = np.linspace(0.0, 1.0, n)
    u = np.clip(u, U_EDGE if math.isinf(lo) else 0.0, 1.0 - U_EDGE if math.isinf(hi) else 1.0)
    theta = np.asarray(prior.quantile(u), dtype=float)
    with np.errstate(all="ignore"):
        density = np.nan_to_num(np.asarray(prior.density(theta), dtype=float), nan=0.0, posinf=0.0)
    cdf = np.asarray(prior.cdf(theta), dtype=float)
    return np.column_stack([theta, density, cdf])


def _grid_rows(prior: MultivariatePrior, box: Box, n: int) -> np.ndarray:
    axes = []
    for lo, hi in box:
        h = (hi - lo) / n
        axes.append(lo + h * (np.arange(n) + 0.5))
    mesh = np.meshgrid(*axes, indexing="ij")
    density = prior(*mesh)
    return np.column_stack([m.ravel() for m in mesh] + [density.ravel()])


def density_table(
    name: str,
    hyperparameters: dict | None = None,
    n: int | None = None,
    numeric: GridConfig2D | None = None,
) -> DensityTable:
    """Density of a catalog prior on its export grid.

    1D tables sit on prior quantiles with a cdf column; 2D and 3D tables on
    cell midpoints of the family's box; numerical 2D densities on their
    mesh nodes.
    """
    entry = get_entry(name)
    hp = entry.resolve(hyperparameters)
    provenance: dict = {"family": name, "hyperparameters": hp}
    if numeric is not None:
        if entry.numeric is None:
            raise ConfigurationError(f"family '{name}' has no numerical bivariate construction")
        d = approximate_density_2d(numeric, entry.numeric.distance())
        rows = np.column_stack([d.mesh.nodes, d.node_densities])
        provenance.update(
            numeric=True,
            eta=numeric.eta,
            eps=numeric.eps,
            eps_tilde=numeric.eps_tilde,
            delta=numeric.delta,
            tau=numeric.tau,
            c_hat=d.c_hat,
            nodes=d.mesh.node_count,
        )
        table = DensityTable(["theta1", "theta2", "density"], rows, provenance, d.mesh, d)
        table.provenance["normalization"] = table.normalization
        return table
    prior = entry.build(hp)
    n = n or TABLE_POINTS[entry.dimension]
    if isinstance(prior, GridDensity1D):
        cdf = integrate.cumulative_trapezoid(prior.values, prior.grid, initial=0.0)
        rows = np.column_stack([prior.grid, prior.values, cdf])
        provenance.update(grid="recipe", epsilon=prior.epsilon, c_hat=prior.c_hat)
        header = ["theta", "density", "cdf"]
    elif isinstance(prior, UnivariatePrior):
        rows = _univariate_rows(prior, n)
        provenance.update(grid="quantiles", points=n)
        header = ["theta", "density", "cdf"]
    else:
        box = entry.box(hp)
        rows = _grid_rows(prior, box, n)
        provenance.update(grid="midpoints", points_per_axis=n, box=[list(b) for b in box])
        header = [f"theta{j + 1}" for j in range(entry.dimension)] + ["density"]
    table = DensityTable(header, rows, provenance)
    table.provenance["normalization"] = table.normalization
    return table
