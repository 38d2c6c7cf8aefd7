"""Distance tools -- Wasserstein distance of a catalog family to its base model."""

from __future__ import annotations

from typing import Annotated

from pydantic import Field

from ..catalog import evaluate_distance, get_entry
from ..server import mcp, _error_response, _hyperparameters, _parse_json, _response


@mcp.tool()
def wasserstein_distance(
    family: Annotated[str, Field(description="Catalog family, e.g. 'precision', 'ar1', 'gaussian-2d'")],
    params: Annotated[str | list | float, Field(description="Parameter point as a number (1D) or JSON array, e.g. '[0.5, 1.2]'")],
    hyperparameters: Annotated[str | dict | None, Field(description="Family hyperparameters as a JSON object, e.g. '{\"n\": 10, \"sigma\": 0.1}'")] = None,
) -> str:
    """Wasserstein distance W(theta) between the family member at `params` and the base model.

    Hyperparameters without a distance role (eta) may be omitted.
    """
    try:
        entry = get_entry(family)
        hp = entry.with_unit_rates(_hyperparameters(hyperparameters))
        point = _parse_json(params, "params")
        value = evaluate_distance(family, point, hp)
        return _response({"family": family, "params": point, "distance": value})
    except Exception as exc:
        return _error_response(exc)
