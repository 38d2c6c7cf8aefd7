"""Calibration tools -- choose eta from a tail statement and read tail probabilities back."""

from __future__ import annotations

from typing import Annotated, Literal

from pydantic import Field

from ..catalog import get_entry
from ..errors import ConfigurationError
from ..numeric1d import GridDensity1D
from ..server import mcp, _error_response, _hyperparameters, _response
from ..univariate import UnivariatePrior, tail_probability as prior_tail_probability
from ..validation import CalibrationTarget, calibrate, grid_tail_probability


def _univariate_entry(family: str):
    entry = get_entry(family)
    if entry.family is None:
        raise ConfigurationError(f"family '{family}' is not univariate (dimension {entry.dimension})")
    return entry


@mcp.tool()
def calibrate_eta(
    family: Annotated[str, Field(description="Univariate catalog family, e.g. 'precision', 'ar1'")],
    U: Annotated[float, Field(description="Tail threshold in the family's parameter units")],
    alpha: Annotated[float, Field(description="Target probability of exceeding U, in (0, 1)")],
    direction: Annotated[Literal["above", "below"], Field(description="Tail side: P(theta > U) or P(theta < U)")] = "above",
    law: Annotated[Literal["exponential", "truncated"], Field(description="Distance law used for the tail")] = "exponential",
    hyperparameters: Annotated[str | dict | None, Field(description="Non-rate hyperparameters as a JSON object, e.g. '{\"n\": 10, \"sigma\": 0.1}'")] = None,
) -> str:
    """Find the rate eta with P(theta beyond U) = alpha for a univariate WCP prior."""
    try:
        entry = _univariate_entry(family)
        hp = _hyperparameters(hyperparameters)
        hp.setdefault("eta", 1.0)
        result = calibrate(entry.family(entry.resolve(hp)), CalibrationTarget(U=U, alpha=alpha, direction=direction), law=law)
        payload = result.model_dump()
        payload["family"] = family
        return _response(payload)
    except Exception as exc:
        return _error_response(exc)


@mcp.tool()
def tail_probability(
    family: Annotated[str, Field(description="Univariate catalog family")],
    U: Annotated[float, Field(description="Tail threshold")],
    eta: Annotated[float, Field(description="Penalization rate")],
    direction: Annotated[Literal["above", "below"], Field(description="Tail side")] = "above",
    hyperparameters: Annotated[str | dict | None, Field(description="Other hyperparameters as a JSON object")] = None,
) -> str:
    """Probability mass of a univariate WCP prior beyond U."""
    try:
        entry = _univariate_entry(family)
        hp = _hyperparameters(hyperparameters)
        hp["eta"] = eta
        prior = entry.build(entry.resolve(hp))
        if isinstance(prior, GridDensity1D):
            value = grid_tail_probability(prior, U, direction)
        elif isinstance(prior, UnivariatePrior):
            value = prior_tail_probability(prior, U, direction)
        else:
            raise ConfigurationError(f"family '{family}' has no tail probability")
        return _response({"family": family, "U": U, "eta": eta, "direction": direction, "probability": value})
    except Exception as exc:
        return _error_response(exc)
