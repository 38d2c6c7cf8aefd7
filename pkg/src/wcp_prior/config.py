"""Configuration models -- pydantic schemas for quadrature, the bivariate grid, studies and the CLI."""

from __future__ import annotations

import math
import os
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------

THREADS_ENV = "WCP_THREADS"
LOG_LEVEL_ENV = "WCP_LOG_LEVEL"


def worker_count() -> int:
    """Return the worker count for replicate/pathfind parallelism.

    ``WCP_THREADS`` overrides the default of ``os.cpu_count()`` capped at 8.
    A value of 1 forces serial execution.
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is not None:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValueError(f"Invalid integer for {THREADS_ENV}: {raw!r}") from exc
        return max(1, value)
    return max(1, min(8, os.cpu_count() or 1))


def log_level(default: str = "WARNING") -> str:
    return os.environ.get(LOG_LEVEL_ENV, default).upper()


# ---------------------------------------------------------------------------
# Numerical settings
# ---------------------------------------------------------------------------


class QuadConfig(BaseModel):
    """Quantile-integral quadrature settings.

    The integral over (0, 1) is truncated to [q, 1-q]; the truncated tails are
    restored by a power-law extrapolation when ``tail_correction`` is set.
    Panels are halved until two successive estimates differ by less than
    ``abs_tol``.
    """

    model_config = ConfigDict(frozen=True)

    q: float = Field(default=1e-7, gt=0.0, lt=0.5)
    abs_tol: float = Field(default=1e-8, gt=0.0)
    initial_panels: int = Field(default=256, ge=4)
    max_halvings: int = Field(default=12, ge=1)
    tail_correction: bool = True


class GridConfig2D(BaseModel):
    """Hyperparameters of the bivariate numerical recipe.

    ``tau`` defaults to ``eps / 1000`` and ``eps_tilde`` to ``eps``.
    ``domain="conic"`` uses rays from the origin over angles [0, cone_angle];
    ``domain="product"`` uses horizontal lines over ``y_range`` with the base
    model on the line x = 0.
    """

    model_config = ConfigDict(frozen=True)

    eta: float = Field(gt=0.0)
    eps: float = Field(gt=0.0)
    delta: float = Field(default=0.01, gt=0.0, lt=1.0)
    tau: float | None = Field(default=None, gt=0.0)
    eps_tilde: float | None = Field(default=None, gt=0.0)
    domain: Literal["conic", "product"] = "conic"
    cone_angle: float = Field(default=math.pi / 2, gt=0.0, lt=2 * math.pi)
    y_range: tuple[float, float] = (0.0, 1.0)
    c: float | None = Field(default=None, gt=0.0)
    n_cap: float = Field(default=1e3, gt=0.0)
    s0: float | None = Field(default=None, gt=0.0)
    tol: float | None = Field(default=None, gt=0.0)
    arc_length: Literal["trapezoid", "segments"] = "trapezoid"
    max_depth: int = Field(default=30, ge=1)

    @model_validator(mode="after")
    def _fill_defaults(self) -> "GridConfig2D":
        if self.tau is None:
            object.__setattr__(self, "tau", self.eps / 1000.0)
        if self.eps_tilde is None:
            object.__setattr__(self, "eps_tilde", self.eps)
        if self.eps_tilde > self.eps:
            raise ValueError(f"eps_tilde ({self.eps_tilde}) must not exceed eps ({self.eps})")
        if self.tol is None:
            object.__setattr__(self, "tol", self.eps_tilde**2 / 100.0)
        lo, hi = self.y_range
        if not lo < hi:
            raise ValueError(f"y_range must be increasing, got {self.y_range}")
        return self

    def initial_step(self, target_w: float) -> float:
        """Line-search starting step: ``s0`` when set, else ``max(1, target_w)``."""
        return self.s0 if self.s0 is not None else max(1.0, target_w)


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tol: float = Field(default=1e-6, gt=0.0)
    grid_size: int = Field(default=64, ge=4)
    bounds: list[tuple[float, float]] | None = None


class PriorSpec(BaseModel):
    """One prior compared in a study.

    ``wcp`` uses ``eta`` (calibrated automatically for AR(1) when omitted);
    ``two_step`` uses ``eta1`` and ``eta2``; ``uniform`` takes nothing.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Literal["wcp", "two_step", "uniform"]
    label: str | None = None
    eta: float | None = Field(default=None, gt=0.0)
    eta1: float | None = Field(default=None, gt=0.0)
    eta2: float | None = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check_rates(self) -> "PriorSpec":
        if self.name == "two_step" and (self.eta1 is None or self.eta2 is None):
            raise ValueError("two_step prior requires eta1 and eta2")
        return self

    @property
    def key(self) -> str:
        return self.label or self.name


class StudyConfig(BaseModel):
    """A repeated-simulation MAP study."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: Literal["ar1", "gaussian_2d", "gpd_2d"]
    true_params: list[float]
    n_obs: int = Field(ge=2)
    replicates: int = Field(default=5000, ge=1)
    priors: list[PriorSpec] = Field(min_length=1)
    seed: int = 0
    sigma: float = Field(default=0.1, gt=0.0)
    fast: bool = False
    optimizer: OptimizerConfig = OptimizerConfig()

    @model_validator(mode="after")
    def _check_params(self) -> "StudyConfig":
        expected = {"ar1": 1, "gaussian_2d": 2, "gpd_2d": 2}[self.model]
        if len(self.true_params) != expected:
            raise ValueError(
                f"true_params for model '{self.model}' needs {expected} values, got {len(self.true_params)}"
            )
        return self

    @property
    def effective_replicates(self) -> int:
        """Replicate count after fast mode (500) is applied."""
        return min(self.replicates, 500) if self.fast else self.replicates


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


class CliConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: Literal["dist", "prior", "calibrate", "tv-study", "simulate"]
    family: str | None = None
    hyperparameters: dict[str, float] = Field(default_factory=dict)
    output_path: str | None = None
    format: Literal["csv", "json"] = "csv"
    seed: int | None = None
