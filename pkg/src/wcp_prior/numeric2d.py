"""Numerical approximation of bivariate WCP densities.

Level curves are traced by bisection line searches along rays from the base
point (conic domains) or along horizontal lines from the base line x = 0
(product domains I x [a, b]). The density lives on a triangulation of a
compact region that cuts off tail mass (through delta) and a thin strip along
the boundary (through tau); it is extended by zero elsewhere.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Literal

import numpy as np
from scipy.spatial import ConvexHull

from .config import GridConfig2D, worker_count
from .errors import (
    AssumptionViolationError,
    ConfigurationError,
    DegenerateLevelCurveError,
    DomainError,
    NonMonotoneFieldError,
    NumericalError,
    ResolutionError,
)
from .geometry import PiecewiseLinearField, PolygonalRegion, Polyline, TriMesh, shift_region, triangulate
from .wasserstein import DistanceMap

logger = logging.getLogger(__name__)

Evaluator2D = Callable[[np.ndarray, np.ndarray], np.ndarray]
FrameKind = Literal["conic", "product"]

STEP_FLOOR = 1e-15
MAX_MOVES = 100_000
LENGTH_FLOOR = 1e-10
ARC_POINTS = 64
CURVES_PER_TASK = 256


def _evaluator(W: DistanceMap | Evaluator2D) -> Evaluator2D:
    fn = W.eval if isinstance(W, DistanceMap) else W

    def evaluate(x, y) -> np.ndarray:
        return np.asarray(fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float)), dtype=float)

    return evaluate


# ---------------------------------------------------------------------------
# Line search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchFrame:
    """Family of search lines, indexed by an angle (conic) or a height (product).

    Conic lines are rays t (cos a, sin a) from the origin; product lines are
    (t, y) from the base line x = 0. In both cases t >= 0 is the offset from
    the base.
    """

    kind: FrameKind = "conic"

    def lines(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        params = np.asarray(params, dtype=float)
        if self.kind == "conic":
            anchors = np.zeros((params.size, 2))
            directions = np.column_stack([np.cos(params), np.sin(params)])
        else:
            anchors = np.column_stack([np.zeros(params.size), params])
            directions = np.tile([1.0, 0.0], (params.size, 1))
        return anchors, directions

    def through(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Anchor, direction and offset of the search line through each point."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.kind == "conic":
            offsets = np.linalg.norm(points, axis=1)
            if np.any(offsets == 0):
                raise DomainError("line search from the origin has no direction")
            return np.zeros_like(points), points / offsets[:, None], offsets
        anchors = np.column_stack([np.zeros(len(points)), points[:, 1]])
        return anchors, np.tile([1.0, 0.0], (len(points), 1)), points[:, 0]

    def parameter(self, points: np.ndarray) -> np.ndarray:
        """Index of the search line through each point: its angle or its height."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.kind == "conic":
            return np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * math.pi)
        return points[:, 1]


def _search(
    W: Evaluator2D,
    anchors: np.ndarray,
    directions: np.ndarray,
    offsets: np.ndarray,
    steps: np.ndarray,
    targets: np.ndarray,
    tol: float,
) -> np.ndarray:
    """Vectorized line search: march by +-s until the target is crossed, halve s, repeat.

    Offsets never go below 0, where W is the base value.
    """
    t = np.asarray(offsets, dtype=float).copy()
    s = np.asarray(steps, dtype=float).copy()
    targets = np.asarray(targets, dtype=float)

    def value(idx: np.ndarray) -> np.ndarray:
        pts = anchors[idx] + t[idx, None] * directions[idx]
        return W(pts[:, 0], pts[:, 1])

    vals = value(np.arange(t.size))
    active = ~(np.abs(vals - targets) <= tol)
    while active.any():
        idx = np.flatnonzero(active)
        if np.any(np.isnan(vals[idx])):
            raise NumericalError("distance evaluated to NaN during the line search")
        moving = idx
        sign = np.where(vals[idx] > targets[idx], -1.0, 1.0)
        moves = 0
        while moving.size:
            t[moving] = np.maximum(t[moving] + sign * s[moving], 0.0)
            vals[moving] = value(moving)
            keep = np.where(sign < 0, (vals[moving] > targets[moving]) & (t[moving] > 0), vals[moving] < targets[moving])
            moving, sign = moving[keep], sign[keep]
            moves += 1
            if moves > MAX_MOVES:
                raise NumericalError(f"line search did not reach the target after {MAX_MOVES} steps")
        s[idx] /= 2.0
        active[idx] = ~(np.abs(vals[idx] - targets[idx]) <= tol)
        if np.any(s[active] < STEP_FLOOR):
            raise NonMonotoneFieldError(f"line search step underflowed below {STEP_FLOOR} before reaching tol={tol}")
    return t


def line_search(
    start,
    step: float,
    target_w: float,
    tol: float,
    W: DistanceMap | Evaluator2D,
    frame: SearchFrame = SearchFrame(),
) -> np.ndarray:
    """A point on the search line through ``start`` with |W - target_w| <= tol."""
    evaluate = _evaluator(W)
    anchors, directions, offsets = frame.through(np.asarray(start, dtype=float))
    t = _search(evaluate, anchors, directions, offsets, np.array([step]), np.array([target_w]), tol)
    return anchors[0] + t[0] * directions[0]


# ---------------------------------------------------------------------------
# Level curves
# ---------------------------------------------------------------------------


def _max_chord(points: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).max())


def _trace(
    W: Evaluator2D,
    frame: SearchFrame,
    first: float,
    last: float,
    steps: np.ndarray,
    targets: np.ndarray,
    tol: float,
    stop_eps: float,
    max_depth: int,
) -> list[np.ndarray]:
    """Trace one polyline per target; the line parameters run from ``first`` to ``last``."""
    m = len(targets)
    params = np.repeat([[first, last]], m, axis=0).ravel()
    anchors, directions = frame.lines(params)
    step2 = np.repeat(steps, 2)
    t = _search(W, anchors, directions, step2, step2, np.repeat(targets, 2), tol)
    ends = (anchors + t[:, None] * directions).reshape(m, 2, 2)
    curves = [ends[j] for j in range(m)]
    todo = [j for j in range(m) if _max_chord(curves[j]) > stop_eps]
    level = 1
    while todo:
        if level > max_depth:
            raise ResolutionError(f"level curve needs more than {max_depth} subdivisions at stop_eps={stop_eps}")
        mids = [0.5 * (curves[j][:-1] + curves[j][1:]) for j in todo]
        counts = [len(mid) for mid in mids]
        owner = np.repeat(todo, counts)
        a, d, t0 = frame.through(np.concatenate(mids))
        t = _search(W, a, d, t0, steps[owner] / 2.0**level, targets[owner], tol)
        found = np.split(a + t[:, None] * d, np.cumsum(counts)[:-1])
        for j, new in zip(todo, found):
            old = curves[j]
            merged = np.empty((2 * len(old) - 1, 2))
            merged[0::2] = old
            merged[1::2] = new
            curves[j] = merged
        todo = [j for j in todo if _max_chord(curves[j]) > stop_eps]
        level += 1
    return curves


def pathfind(
    phi_r: float,
    phi_l: float,
    step: float,
    tol: float,
    target_w: float,
    stop_eps: float,
    W: DistanceMap | Evaluator2D,
    frame: SearchFrame = SearchFrame(),
    max_depth: int = 30,
) -> Polyline:
    """Piecewise-linear level curve at ``target_w`` between two search lines.

    The end points are searched on the lines phi_l + tol and phi_r - tol
    (angles for conic frames, heights for product frames); chords are then
    split at their midpoints, searching along the line through each midpoint
    with the step halved per level, until no chord exceeds ``stop_eps``.
    The polyline runs from the phi_l side to the phi_r side.
    """
    curves = pathfind_many(phi_r, phi_l, np.array([step]), tol, np.array([target_w]), stop_eps, W, frame, max_depth)
    return curves[0]


def pathfind_many(
    phi_r: float,
    phi_l: float,
    steps: np.ndarray,
    tol: float,
    targets: np.ndarray,
    stop_eps: float,
    W: DistanceMap | Evaluator2D,
    frame: SearchFrame = SearchFrame(),
    max_depth: int = 30,
    workers: int | None = None,
) -> list[Polyline]:
    """``pathfind`` for many targets at once, split across ``workers`` threads."""
    evaluate = _evaluator(W)
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    steps = np.broadcast_to(np.asarray(steps, dtype=float), targets.shape).copy()
    first, last = phi_l + tol, phi_r - tol
    workers = worker_count() if workers is None else max(1, workers)
    chunks = np.array_split(np.arange(targets.size), max(1, min(workers, math.ceil(targets.size / CURVES_PER_TASK))))

    def run(idx: np.ndarray) -> list[np.ndarray]:
        return _trace(evaluate, frame, first, last, steps[idx], targets[idx], tol, stop_eps, max_depth)

    if len(chunks) == 1:
        traced = run(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            traced = [curve for part in pool.map(run, chunks) for curve in part]
    return [Polyline(points) for points in traced]


# ---------------------------------------------------------------------------
# Region construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffRegion:
    """The compact region between the w_lower and w_upper level curves.

    ``region`` is the cutoff region itself; ``interior`` additionally drops
    the points closer than tau to the boundary of the parameter space.
    """

    region: PolygonalRegion
    interior: PolygonalRegion
    w_upper: float
    w_lower: float
    outer: Polyline
    inner: Polyline
    frame: SearchFrame


def _search_limits(config: GridConfig2D) -> tuple[float, float]:
    """(phi_r, phi_l) handed to pathfind so the end lines sit tol inside the domain."""
    lo, hi = (0.0, config.cone_angle) if config.domain == "conic" else config.y_range
    return lo + 2.0 * config.tol, hi - 2.0 * config.tol


def _inward_point(config: GridConfig2D) -> np.ndarray:
    """theta0 + tau v with v the cone bisector (conic) or the x-axis at mid-height (product)."""
    if config.domain == "conic":
        half = 0.5 * config.cone_angle
        return config.tau * np.array([math.cos(half), math.sin(half)])
    return np.array([config.tau, 0.5 * sum(config.y_range)])


def _closed_polygon(config: GridConfig2D, curve: Polyline) -> np.ndarray:
    pts = curve.points
    if config.domain == "conic":
        return np.vstack([[0.0, 0.0], pts])
    return np.vstack([[0.0, pts[0, 1]], pts, [0.0, pts[-1, 1]]])


def _boundary_clip(config: GridConfig2D, reach: float) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]:
    """Clips and holes that keep points at distance >= tau from the domain boundary."""
    tau = config.tau
    if config.domain == "product":
        a, b = config.y_range
        rect = np.array([[tau, a + tau], [reach, a + tau], [reach, b - tau], [tau, b - tau]])
        return (rect,), ()
    phi = config.cone_angle
    angles = np.linspace(0.0, phi, ARC_POINTS + 1)
    if phi <= math.pi:
        apex = tau / math.sin(0.5 * phi) * np.array([math.cos(0.5 * phi), math.sin(0.5 * phi)])
        cone = np.vstack([apex, apex + reach * np.column_stack([np.cos(angles), np.sin(angles)])])
        return (cone,), ()
    rest = np.linspace(phi, 2.0 * math.pi, ARC_POINTS + 1)
    wedge = np.vstack([[0.0, 0.0], reach * np.column_stack([np.cos(rest), np.sin(rest)])])
    turn = np.linspace(0.0, 2.0 * math.pi, ARC_POINTS, endpoint=False)
    disc = tau * np.column_stack([np.cos(turn), np.sin(turn)])
    grown = (wedge[:, None, :] + disc[None, :, :]).reshape(-1, 2)
    hull = grown[ConvexHull(grown).vertices]
    return (), (hull,)


def _check_monotone_lines(W: Evaluator2D, config: GridConfig2D, frame: SearchFrame, reach: float) -> None:
    lo, hi = _search_limits(config)
    params = np.linspace(lo, hi, 9)
    anchors, directions = frame.lines(params)
    offsets = np.geomspace(1e-3 * reach, reach, 64)
    pts = anchors[:, None, :] + offsets[None, :, None] * directions[:, None, :]
    values = W(pts[..., 0], pts[..., 1])
    if np.any(np.diff(values, axis=1) <= 0):
        bad = int(np.argmax(np.any(np.diff(values, axis=1) <= 0, axis=1)))
        raise AssumptionViolationError(f"distance is not increasing along the search line at parameter {params[bad]:.6g}")


def region_construct(config: GridConfig2D, W: DistanceMap | Evaluator2D) -> CutoffRegion:
    """Cutoff region between the level curves w_lower and w_upper.

    w_upper = -log(delta/2) / eta and
    w_lower = W(theta0 + tau v) - log(1 - (delta + tau)/2) / eta. The region is
    (Pi intersected with its tau-shift) minus Pi*, with Pi and Pi* bounded by
    the level curves at w_upper and w_lower.
    """
    evaluate = _evaluator(W)
    frame = SearchFrame(config.domain)
    eta, delta, tau = config.eta, config.delta, config.tau
    w_upper = -math.log(delta / 2.0) / eta
    probe = _inward_point(config)
    w_lower = float(evaluate(probe[:1], probe[1:])[0]) - math.log1p(-(delta + tau) / 2.0) / eta
    if not w_lower < w_upper:
        raise ConfigurationError(
            f"empty cutoff region: w_lower={w_lower:.6g} >= w_upper={w_upper:.6g} (delta={delta}, tau={tau})"
        )
    phi_r, phi_l = _search_limits(config)
    if not phi_r < phi_l:
        raise ConfigurationError(f"search lines collapse: tol={config.tol} is too large for the domain")
    steps = np.array([config.initial_step(w_upper), config.initial_step(w_lower)])
    outer, inner = pathfind_many(
        phi_r, phi_l, steps, config.tol, np.array([w_upper, w_lower]), config.eps_tilde, evaluate, frame, config.max_depth
    )
    reach = float(np.abs(outer.points).max())
    _check_monotone_lines(evaluate, config, frame, reach)

    pi_outer = PolygonalRegion(_closed_polygon(config, outer))
    shift_angle = 0.5 * config.cone_angle if config.domain == "conic" else 0.0
    region = pi_outer.intersection(shift_region(pi_outer, tau, shift_angle)).difference(_closed_polygon(config, inner))
    clips, holes = _boundary_clip(config, 2.0 * reach + 1.0)
    interior = PolygonalRegion(region.boundary, region.holes + holes, region.clips + clips)
    logger.info("region: w_lower=%.6g w_upper=%.6g outer=%d inner=%d points", w_lower, w_upper, len(outer), len(inner))
    return CutoffRegion(region, interior, w_upper, w_lower, outer, inner, frame)


def level_curve(config: GridConfig2D, W: DistanceMap | Evaluator2D, w: float) -> Polyline:
    """The traced level curve at w with the search settings of ``config``."""
    phi_r, phi_l = _search_limits(config)
    return pathfind(
        phi_r, phi_l, config.initial_step(w), config.tol, w, config.eps_tilde, W, SearchFrame(config.domain), config.max_depth
    )


# ---------------------------------------------------------------------------
# Density
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridDensity2D:
    """Piecewise-linear density on a triangulation, zero off the mesh."""

    mesh: TriMesh
    node_densities: np.ndarray
    config: GridConfig2D
    c_hat: float
    w_upper: float
    w_lower: float
    node_distances: np.ndarray | None = None

    @cached_property
    def field(self) -> PiecewiseLinearField:
        return PiecewiseLinearField(self.mesh, self.node_densities)

    def __call__(self, x, y=None) -> np.ndarray:
        """Density at points given as (x, y) arrays or one (n, 2) array."""
        if y is None:
            pts = np.asarray(x, dtype=float).reshape(-1, 2)
            shape = pts.shape[:1]
        else:
            x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
            pts = np.column_stack([x.ravel(), y.ravel()])
            shape = x.shape
        values = self.field(pts)
        return np.where(np.isnan(values), 0.0, values).reshape(shape)

    def integral(self) -> float:
        """Exact integral of the interpolant."""
        means = self.node_densities[self.mesh.triangles].mean(axis=1)
        return float(np.sum(np.abs(self.mesh.areas) * means))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.mesh.nodes.min(axis=0)
        hi = self.mesh.nodes.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def rows(self) -> list[tuple[float, float, float]]:
        return [(float(x), float(y), float(d)) for (x, y), d in zip(self.mesh.nodes, self.node_densities)]


def _c_hat(config: GridConfig2D, W: Evaluator2D) -> float:
    if config.c is not None:
        return float(config.c)
    n = config.n_cap
    if config.domain == "conic":
        half = 0.5 * config.cone_angle
        point = (np.array([n * math.cos(half)]), np.array([n * math.sin(half)]))
    else:
        point = (np.array([n]), np.array([0.5 * sum(config.y_range)]))
    value = float(W(*point)[0])
    return value if math.isfinite(value) else math.inf


def _arc_coordinates(
    curves: list[Polyline], nodes: np.ndarray, frame: SearchFrame, method
) -> tuple[np.ndarray, np.ndarray]:
    """Partial arc length up to the search line through each node, and the total length.

    Curves run from the last search line to the first, so the line
    parameter decreases along them.
    """
    partial = np.empty(len(curves))
    total = np.empty(len(curves))
    keys = -frame.parameter(nodes)
    for k, (curve, key) in enumerate(zip(curves, keys)):
        along = -frame.parameter(curve.points)
        if np.any(np.diff(along) <= 0):
            raise AssumptionViolationError(f"level curve through node {k} crosses a search line twice")
        lengths = curve.partial_lengths(method)
        partial[k] = np.interp(key, along, lengths)
        total[k] = lengths[-1]
    return partial, total


def approximate_density_2d(config: GridConfig2D, W: DistanceMap | Evaluator2D) -> GridDensity2D:
    """Approximate bivariate WCP density at the nodes of an eps-mesh.

    W lives on an eps_tilde-mesh and its gradient comes from the hat
    functions; the partial arc length u1 is a field on the eps-mesh whose
    hat gradients give the second row of the Jacobian.
    """
    started = time.perf_counter()
    evaluate = _evaluator(W)
    cut = region_construct(config, evaluate)
    fine = triangulate(cut.interior, config.eps_tilde)
    w_fine = PiecewiseLinearField(fine, evaluate(fine.nodes[:, 0], fine.nodes[:, 1]))
    coarse = fine if config.eps == config.eps_tilde else triangulate(cut.interior, config.eps)
    nodes = coarse.nodes

    if coarse is fine:
        w_nodes = w_fine.node_values
        grad_w = w_fine.node_gradients()
    else:
        w_nodes = w_fine(nodes)
        missing = np.isnan(w_nodes)
        w_nodes[missing] = evaluate(nodes[missing, 0], nodes[missing, 1])
        g = w_fine.node_gradients()
        grad_w = np.column_stack([PiecewiseLinearField(fine, g[:, j])(nodes) for j in range(2)])
        grad_w = np.where(np.isnan(grad_w), 0.0, grad_w)

    phi_r, phi_l = _search_limits(config)
    steps = np.array([config.initial_step(w) for w in w_nodes])
    curves = pathfind_many(
        phi_r, phi_l, steps, config.tol, w_nodes, config.eps_tilde, evaluate, cut.frame, config.max_depth
    )
    u_nodes, l_nodes = _arc_coordinates(curves, nodes, cut.frame, config.arc_length)
    if np.any(l_nodes < LENGTH_FLOOR):
        k = int(np.argmin(l_nodes))
        raise DegenerateLevelCurveError(f"level curve at w={w_nodes[k]:.6g} has length {l_nodes[k]:.3g}")
    grad_u = PiecewiseLinearField(coarse, u_nodes).node_gradients()
    det = grad_w[:, 0] * grad_u[:, 1] - grad_w[:, 1] * grad_u[:, 0]

    c_hat = _c_hat(config, evaluate)
    truncation = 1.0 if math.isinf(c_hat) else -math.expm1(-config.eta * c_hat)
    density = np.abs(det) * config.eta * np.exp(-config.eta * w_nodes) / truncation / l_nodes
    result = GridDensity2D(coarse, density, config, c_hat, cut.w_upper, cut.w_lower, np.asarray(w_nodes, dtype=float))
    logger.info(
        "grid2d: eps=%g eps_tilde=%g nodes=%d c_hat=%g mass=%.6f in %.0f ms",
        config.eps,
        config.eps_tilde,
        coarse.node_count,
        c_hat,
        result.integral(),
        1000.0 * (time.perf_counter() - started),
    )
    return result


# ---------------------------------------------------------------------------
# Total variation
# ---------------------------------------------------------------------------


def tv_between(
    p: Callable[[np.ndarray, np.ndarray], np.ndarray],
    q: Callable[[np.ndarray, np.ndarray], np.ndarray],
    bounds: tuple[float, float, float, float],
    p_total: float | None = None,
    q_total: float | None = None,
    n: int = 128,
    tol: float = 1e-4,
    max_n: int = 1024,
) -> float:
    """Half the L1 distance between two planar densities.

    Uses |p - q| = p + q - 2 min(p, q): the masses p_total and q_total (box
    integrals by default; pass 1 for a normalized closed form whose support
    leaves the box) plus a midpoint-rule integral of min(p, q) over
    ``bounds``, doubled in resolution until two estimates agree to ``tol``.
    """
    x0, y0, x1, y1 = bounds
    if not (x1 > x0 and y1 > y0):
        raise DomainError(f"degenerate integration box {bounds}")
    previous = math.nan
    while True:
        hx, hy = (x1 - x0) / n, (y1 - y0) / n
        gx, gy = np.meshgrid(x0 + hx * (np.arange(n) + 0.5), y0 + hy * (np.arange(n) + 0.5), indexing="ij")
        pv = np.nan_to_num(np.asarray(p(gx, gy), dtype=float))
        qv = np.nan_to_num(np.asarray(q(gx, gy), dtype=float))
        cell = hx * hy
        mass_p = float(pv.sum()) * cell if p_total is None else p_total
        mass_q = float(qv.sum()) * cell if q_total is None else q_total
        tv = 0.5 * (mass_p + mass_q) - float(np.minimum(pv, qv).sum()) * cell
        logger.debug("tv_between n=%d tv=%.6g", n, tv)
        if abs(tv - previous) < tol or n >= max_n:
            return tv
        previous = tv
        n *= 2
