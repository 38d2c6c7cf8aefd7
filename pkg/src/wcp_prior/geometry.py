"""Planar regions, structured triangulations and piecewise-linear fields.

Point-in-polygon tests use :class:`matplotlib.path.Path`; point location and
barycentric interpolation use :mod:`matplotlib.tri`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from matplotlib import tri as mtri
from matplotlib.path import Path

from .errors import DomainError, MeshingError

logger = logging.getLogger(__name__)

OUTSIDE = math.nan
MIN_TRIANGLE_AREA = 1e-14

_CHUNK = 2048


# ---------------------------------------------------------------------------
# Polygon helpers
# ---------------------------------------------------------------------------


def _as_polygon(vertices) -> np.ndarray:
    poly = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if len(poly) > 1 and np.allclose(poly[0], poly[-1]):
        poly = poly[:-1]
    if len(poly) < 3:
        raise DomainError(f"a polygon needs at least 3 vertices, got {len(poly)}")
    return poly


def signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def nearest_on_polygon(points: np.ndarray, vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distance from each point to the closed polygon and the nearest edge point."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    a = vertices
    ab = np.roll(vertices, -1, axis=0) - a
    len2 = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    dist = np.empty(len(points))
    proj = np.empty_like(points)
    for start in range(0, len(points), _CHUNK):
        p = points[start : start + _CHUNK]
        ap = p[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pei,ei->pe", ap, ab) / len2, 0.0, 1.0)
        candidates = a[None, :, :] + t[..., None] * ab[None, :, :]
        d = np.linalg.norm(p[:, None, :] - candidates, axis=2)
        idx = np.argmin(d, axis=1)
        rows = np.arange(len(p))
        dist[start : start + _CHUNK] = d[rows, idx]
        proj[start : start + _CHUNK] = candidates[rows, idx]
    return dist, proj


def _inside_polygon(points: np.ndarray, vertices: np.ndarray, tol: float) -> np.ndarray:
    inside = Path(vertices).contains_points(points)
    rest = ~inside
    if rest.any():
        dist, _ = nearest_on_polygon(points[rest], vertices)
        inside[rest] = dist <= tol
    return inside


def _segments_cross(vertices: np.ndarray) -> bool:
    """True when two non-adjacent edges of the closed polygon properly intersect."""
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    k = len(a)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    idx = np.arange(k)
    for start in range(0, k, 256):
        i = idx[start : start + 256, None]
        j = idx[None, :]
        mask = (j > i + 1) & ~((i == 0) & (j == k - 1))
        if not mask.any():
            continue
        ai, bi = a[i[:, 0]][:, None, :], b[i[:, 0]][:, None, :]
        aj, bj = a[None, :, :], b[None, :, :]
        d1 = orient(ai, bi, aj)
        d2 = orient(ai, bi, bj)
        d3 = orient(aj, bj, ai)
        d4 = orient(aj, bj, bi)
        crossing = (d1 * d2 < 0) & (d3 * d4 < 0) & mask
        if crossing.any():
            return True
    return False


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolygonalRegion:
    """A closed polygon, optionally intersected with ``clips`` and minus ``holes``.

    Membership is inclusive: points within ``1e-12 * scale`` of an edge
    belong to the region.
    """

    boundary: np.ndarray
    holes: tuple[np.ndarray, ...] = ()
    clips: tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "boundary", _as_polygon(self.boundary))
        object.__setattr__(self, "holes", tuple(_as_polygon(h) for h in self.holes))
        object.__setattr__(self, "clips", tuple(_as_polygon(c) for c in self.clips))
        if abs(signed_area(self.boundary)) <= 0.0:
            raise DomainError("region boundary has zero area")

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> "PolygonalRegion":
        return cls(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]))

    @property
    def scale(self) -> float:
        return max(1.0, float(np.abs(self.boundary).max()))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.boundary.min(axis=0)
        hi = self.boundary.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @property
    def area(self) -> float:
        """Area of the outer boundary (clips and holes not subtracted)."""
        return abs(signed_area(self.boundary))

    def is_simple(self) -> bool:
        return not _segments_cross(self.boundary)

    def contains(self, points, tol: float | None = None) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        tol = 1e-12 * self.scale if tol is None else tol
        inside = _inside_polygon(points, self.boundary, tol)
        for clip in self.clips:
            inside &= _inside_polygon(points, clip, tol)
        for hole in self.holes:
            in_hole = Path(hole).contains_points(points)
            if in_hole.any():
                dist, _ = nearest_on_polygon(points[in_hole], hole)
                in_hole[in_hole] = dist > tol
            inside &= ~in_hole
        return inside

    def intersection(self, other: "PolygonalRegion") -> "PolygonalRegion":
        return PolygonalRegion(self.boundary, self.holes + other.holes, self.clips + (other.boundary,) + other.clips)

    def difference(self, polygon) -> "PolygonalRegion":
        return PolygonalRegion(self.boundary, self.holes + (_as_polygon(polygon),), self.clips)

    def outer_polygons(self) -> tuple[np.ndarray, ...]:
        return (self.boundary,) + self.clips


def shift_region(region: PolygonalRegion, t: float, phi: float) -> PolygonalRegion:
    """Translate every vertex by t (cos phi, sin phi)."""
    offset = t * np.array([math.cos(phi), math.sin(phi)])
    return PolygonalRegion(
        region.boundary + offset,
        tuple(h + offset for h in region.holes),
        tuple(c + offset for c in region.clips),
    )


# ---------------------------------------------------------------------------
# Meshes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TriMesh:
    nodes: np.ndarray
    triangles: np.ndarray
    target_width: float
    min_edge_constant: float = field(default=math.nan)

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        )

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)

    @cached_property
    def triangulation(self) -> mtri.Triangulation:
        return mtri.Triangulation(self.nodes[:, 0], self.nodes[:, 1], self.triangles)

    @cached_property
    def trifinder(self) -> mtri.TriFinder:
        return self.triangulation.get_trifinder()

    @property
    def node_count(self) -> int:
        return int(len(self.nodes))

    def incident_area(self) -> np.ndarray:
        """Total area of the triangles touching each node."""
        total = np.zeros(self.node_count)
        np.add.at(total, self.triangles.ravel(), np.repeat(self.areas, 3))
        return total

    def to_text(self) -> str:
        lines = [str(self.node_count)]
        lines += [f"{x:.17g} {y:.17g}" for x, y in self.nodes]
        lines.append(str(len(self.triangles)))
        lines += [f"{i} {j} {k}" for i, j, k in self.triangles]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, target_width: float = math.nan) -> "TriMesh":
        rows = [line.split() for line in text.strip().splitlines()]
        n = int(rows[0][0])
        nodes = np.array([[float(v) for v in row] for row in rows[1 : 1 + n]]).reshape(-1, 2)
        m = int(rows[1 + n][0])
        triangles = np.array([[int(v) for v in row] for row in rows[2 + n : 2 + n + m]], dtype=np.int64).reshape(-1, 3)
        return cls(nodes, triangles, target_width)


def _snap(region: PolygonalRegion, nodes: np.ndarray, inside: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Project outside nodes lying within h/4 of an outer edge onto it.

    Grid nodes are h apart and move at most h/4, so snapped nodes stay at
    least h/2 from every other node.
    """
    outside = np.flatnonzero(~inside)
    if outside.size == 0:
        return nodes, inside
    polygons = region.outer_polygons()
    dist = np.min([nearest_on_polygon(nodes[outside], poly)[0] for poly in polygons], axis=0)
    candidates = outside[dist <= h / 4.0]
    if candidates.size == 0:
        return nodes, inside
    origin = nodes[candidates]
    moved = origin.copy()
    tol = 1e-12 * region.scale
    for _ in range(3):
        for poly in polygons:
            off = ~_inside_polygon(moved, poly, tol)
            if off.any():
                moved[off] = nearest_on_polygon(moved[off], poly)[1]
    ok = region.contains(moved) & (np.linalg.norm(moved - origin, axis=1) <= h / 4.0 + tol)
    snapped = nodes.copy()
    snapped[candidates[ok]] = moved[ok]
    new_inside = inside.copy()
    new_inside[candidates[ok]] = True
    logger.debug("snapped %d of %d boundary candidates", int(ok.sum()), candidates.size)
    return snapped, new_inside


def triangulate(region: PolygonalRegion, h: float) -> TriMesh:
    """Structured triangulation: pitch-h grid anchored at the origin, cells split in two.

    Nodes within h/4 outside the outer boundary are snapped onto it; triangles
    are kept when their three vertices and their centroid lie in the region.
    """
    if h <= 0:
        raise DomainError(f"mesh width must be > 0, got {h}")
    x0, y0, x1, y1 = region.bounds
    ix = np.arange(math.floor(x0 / h) - 1, math.ceil(x1 / h) + 2)
    iy = np.arange(math.floor(y0 / h) - 1, math.ceil(y1 / h) + 2)
    nx, ny = len(ix), len(iy)
    gx, gy = np.meshgrid(ix * h, iy * h, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    inside = region.contains(nodes)
    nodes, inside = _snap(region, nodes, inside, h)

    cell = np.arange(nx - 1)[:, None] * ny + np.arange(ny - 1)[None, :]
    a = cell.ravel()
    b, c, d = a + ny, a + ny + 1, a + 1
    candidates = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    keep = inside[candidates].all(axis=1)
    candidates = candidates[keep]
    if len(candidates):
        centroids = nodes[candidates].mean(axis=1)
        candidates = candidates[region.contains(centroids)]
    p = nodes[candidates]
    doubled = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = doubled < 0
    candidates[flip] = candidates[flip][:, [0, 2, 1]]
    candidates = candidates[np.abs(doubled) / 2.0 > MIN_TRIANGLE_AREA]
    if len(candidates) == 0:
        raise MeshingError(
            f"no triangles survive meshing at h={h}: region bounds {region.bounds} may be thinner than the mesh width"
        )

    used = np.unique(candidates)
    index = np.full(len(nodes), -1, dtype=np.int64)
    index[used] = np.arange(len(used))
    mesh_nodes = nodes[used]
    mesh_triangles = index[candidates]
    edges = np.linalg.norm(mesh_nodes[mesh_triangles] - np.roll(mesh_nodes[mesh_triangles], -1, axis=1), axis=2)
    constant = float(edges.min() / h)
    logger.debug("triangulated: h=%g nodes=%d triangles=%d C=%.3f", h, len(used), len(mesh_triangles), constant)
    return TriMesh(mesh_nodes, mesh_triangles, float(h), constant)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseLinearField:
    mesh: TriMesh
    node_values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.node_values, dtype=float)
        if values.shape != (self.mesh.node_count,):
            raise DomainError(f"expected {self.mesh.node_count} node values, got shape {values.shape}")
        object.__setattr__(self, "node_values", values)

    @cached_property
    def _interpolator(self) -> mtri.LinearTriInterpolator:
        return mtri.LinearTriInterpolator(self.mesh.triangulation, self.node_values, trifinder=self.mesh.trifinder)

    def __call__(self, points) -> np.ndarray:
        """Barycentric interpolation; NaN (the outside marker) off the mesh."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        values = self._interpolator(points[:, 0], points[:, 1])
        return np.ma.filled(np.ma.asarray(values, dtype=float), OUTSIDE)

    @cached_property
    def triangle_gradients(self) -> np.ndarray:
        return field_gradient(self)

    def node_gradients(self) -> np.ndarray:
        """Area-weighted average of the gradients of the incident triangles."""
        weights = np.abs(self.mesh.areas)
        total = np.zeros((self.mesh.node_count, 2))
        for corner in range(3):
            np.add.at(total, self.mesh.triangles[:, corner], self.triangle_gradients * weights[:, None])
        return total / self.mesh.incident_area()[:, None]


def field_gradient(field: PiecewiseLinearField) -> np.ndarray:
    """Exact per-triangle gradient of the piecewise-linear interpolant."""
    mesh = field.mesh
    if np.any(np.abs(mesh.areas) <= MIN_TRIANGLE_AREA):
        raise MeshingError("mesh contains a degenerate triangle")
    p = mesh.nodes[mesh.triangles]
    f = field.node_values[mesh.triangles]
    edges = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=1)
    rhs = np.stack([f[:, 1] - f[:, 0], f[:, 2] - f[:, 0]], axis=1)
    return np.linalg.solve(edges, rhs[..., None])[..., 0]


def locate_and_interpolate(field: PiecewiseLinearField, point) -> float | np.ndarray:
    values = field(point)
    return float(values[0]) if np.ndim(point) == 1 else values


# ---------------------------------------------------------------------------
# Polylines
# ---------------------------------------------------------------------------

ArcMethod = Literal["trapezoid", "segments"]


@dataclass(frozen=True)
class Polyline:
    points: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float).reshape(-1, 2))

    def __len__(self) -> int:
        return len(self.points)

    def segment_lengths(self, method: ArcMethod = "trapezoid") -> np.ndarray:
        """Per-segment contributions to the arc length.

        ``trapezoid`` averages the chord with the chord of the shifted points
        B2(x_i, y_i) = (x_i, y_{i-1}), taking y_{-1} = y_0.
        """
        delta = np.diff(self.points, axis=0)
        chords = np.linalg.norm(delta, axis=1)
        if method == "segments":
            return chords
        previous_dy = np.concatenate([[0.0], delta[:-1, 1]])
        shifted = np.hypot(delta[:, 0], previous_dy)
        return 0.5 * chords + 0.5 * shifted

    def partial_lengths(self, method: ArcMethod = "trapezoid") -> np.ndarray:
        """Cumulative arc length at every point (starts at 0)."""
        if len(self) < 2:
            return np.zeros(len(self))
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths(method))])

    def length(self, method: ArcMethod = "trapezoid") -> float:
        return float(self.partial_lengths(method)[-1]) if len(self) else 0.0


def trapezoid_arc_length(points, upto: int | None = None, method: ArcMethod = "trapezoid") -> float:
    line = points if isinstance(points, Polyline) else Polyline(points)
    if len(line) < 2:
        logger.warning("arc length of a polyline with %d point(s) is 0", len(line))
        return 0.0
    cumulative = line.partial_lengths(method)
    return float(cumulative[-1] if upto is None else cumulative[upto])
