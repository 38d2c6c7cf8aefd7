"""Prior tools -- density values of catalog priors at requested points."""

from __future__ import annotations

from typing import Annotated

import numpy as np
from pydantic import Field

from ..catalog import get_entry
from ..errors import ConfigurationError
from ..server import mcp, _error_response, _hyperparameters, _parse_json, _response


@mcp.tool()
def prior_density(
    family: Annotated[str, Field(description="Catalog family, e.g. 'sd', 'gpd-tail', 'gaussian-cov-3d'")],
    points: Annotated[str | list, Field(description="JSON array of points: numbers for 1D families, arrays for 2D/3D, e.g. '[[0, 1], [0.5, 2]]'")],
    hyperparameters: Annotated[str | dict | None, Field(description="Family hyperparameters as a JSON object, e.g. '{\"eta\": 10}'")] = None,
) -> str:
    """Evaluate a WCP prior density at one or more points."""
    try:
        entry = get_entry(family)
        hp = entry.resolve(_hyperparameters(hyperparameters))
        pts = np.asarray(_parse_json(points, "points"), dtype=float)
        if entry.dimension == 1:
            pts = pts.reshape(-1)
        else:
            pts = pts.reshape(-1, entry.dimension) if pts.size else pts.reshape(0, entry.dimension)
            if pts.shape[1] != entry.dimension:
                raise ConfigurationError(f"family '{family}' needs {entry.dimension}-dimensional points")
        prior = entry.build(hp)
        values = prior(pts) if entry.dimension == 1 else prior(*pts.T)
        return _response(
            {
                "family": family,
                "hyperparameters": hp,
                "points": pts.tolist(),
                "density": np.atleast_1d(np.asarray(values, dtype=float)).tolist(),
            }
        )
    except Exception as exc:
        return _error_response(exc)
