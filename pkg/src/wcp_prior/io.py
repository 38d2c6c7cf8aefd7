"""Density tables (CSV, 17 significant digits) and their JSON sidecars."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigurationError
from .geometry import TriMesh

DIGITS = 17


def format_number(value: float) -> str:
    return f"{float(value):.{DIGITS}g}"


def table_text(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    buffer = _io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else format_number(v) for v in row])
    return buffer.getvalue()


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(table_text(header, rows))
    return path


def read_table(path: str | Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    return header, data.reshape(-1, len(header))


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    return value


def dumps(payload: Any) -> str:
    """Deterministic JSON: sorted keys, two-space indent, non-finite floats as strings."""
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload))
    return path


def sidecar_path(table: str | Path) -> Path:
    return Path(table).with_suffix(".json")


def mesh_path(table: str | Path) -> Path:
    return Path(table).with_suffix(".mesh")


def write_sidecar(table: str | Path, provenance: dict, stamp: bool = True) -> Path:
    """Provenance next to a table; the timestamp lives under ``metadata`` only."""
    payload = dict(provenance)
    if stamp:
        payload["metadata"] = {"written_at": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    return write_json(sidecar_path(table), payload)


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# Re-integration
# ---------------------------------------------------------------------------


def _regular_axis(values: np.ndarray) -> tuple[np.ndarray, float]:
    axis = np.unique(values)
    if len(axis) < 2:
        raise ConfigurationError("a grid axis needs at least two distinct values")
    steps = np.diff(axis)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ConfigurationError("grid axis is not evenly spaced")
    return axis, float(steps[0])


def table_integral(header: Sequence[str], data: np.ndarray, mesh: TriMesh | None = None) -> float:
    """Integral of a density table.

    1D tables integrate with the trapezoid rule; regular 2D/3D tables of cell
    midpoints with the midpoint rule; mesh tables exactly for the linear
    interpolant (node order must match the mesh).
    """
    density = data[:, header.index("density")]
    coords = data[:, : header.index("density")]
    if coords.shape[1] == 1:
        return float(integrate.trapezoid(density, coords[:, 0]))
    if mesh is not None:
        if mesh.node_count != len(density):
            raise ConfigurationError(f"mesh has {mesh.node_count} nodes but the table has {len(density)} rows")
        means = density[mesh.triangles].mean(axis=1)
        return float(np.sum(np.abs(mesh.areas) * means))
    cell = 1.0
    for j in range(coords.shape[1]):
        _, step = _regular_axis(coords[:, j])
        cell *= step
    return float(density.sum() * cell)
