import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from src.config.settings import settings
from src.discretize.grid import Grid
from src.geometry.frames import VectorFieldFrame
from src.utils.errors import ParameterError, PreconditionError, StructuralError

logger = logging.getLogger(__name__)

PINV_RCOND = 1e-12


@dataclass(frozen=True, eq=False)
class ReachabilityGraph:
    """
    Graph on the interior nodes of a grid

    adjacency[x, y] is the control cost |a| of the one-step move y - x =
    sum_i a_i X_iI(m) with m = (x + y) / 2; moves the frame cannot produce
    at m are absent. The adjacency is symmetric.
    """

    grid: Grid
    adjacency: sparse.csr_matrix
    stencil_radius: int
    span_tol: float

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.grid.n_interior)

    def edges(self) -> np.ndarray:
        """(E, 3) array of (source, target, cost)"""
        coo = self.adjacency.tocoo()
        return np.column_stack([coo.row, coo.col, coo.data])


@dataclass(frozen=True, eq=False)
class DistanceField:
    """d_X(source, .) at every interior node, +inf where unreachable"""

    grid: Grid
    source: int
    values: np.ndarray


def _stencil_offsets(n: int, radius: int) -> np.ndarray:
    offsets = [o for o in itertools.product(range(-radius, radius + 1), repeat=n) if any(o)]
    return np.array(offsets, dtype=np.int64)


def build_reachability_graph(
    frame: VectorFieldFrame,
    grid: Grid,
    stencil_radius: Optional[int] = None,
    span_tol: Optional[float] = None
) -> ReachabilityGraph:
    """
    One-step least-squares control graph

    For every interior node x and every interior lattice neighbor y within the
    stencil, solve y - x = sum_i a_i X_iI(m) at the midpoint m = (x + y) / 2 in
    the least-squares sense; the edge is kept when the residual is at most
    span_tol * |y - x|, with cost |a|. Along a straight segment an affine
    frame is exact at the midpoint.

    Args:
        frame: Vector-field frame
        grid: Grid (edges connect interior nodes only)
        stencil_radius: Neighbor offsets in {-r..r}^n
        span_tol: Relative residual tolerance

    Returns:
        ReachabilityGraph
    """
    stencil_radius = settings.STENCIL_RADIUS if stencil_radius is None else stencil_radius
    span_tol = settings.METRIC_SPAN_TOL if span_tol is None else span_tol

    if stencil_radius < 1:
        raise ParameterError(f"stencil_radius must be >= 1, got {stencil_radius}")
    if grid.n_interior == 0:
        raise StructuralError("reachability graph needs a nonempty interior")
    if frame.n != grid.n:
        raise ParameterError(f"frame '{frame.label}' is {frame.n}D, grid is {grid.n}D")

    count = grid.n_interior
    offsets = _stencil_offsets(grid.n, stencil_radius)

    resolution = np.asarray(grid.resolution)
    multi = np.stack(np.unravel_index(grid.interior_index, grid.resolution), axis=1)
    targets = multi[:, None, :] + offsets[None]
    inside = np.all((targets >= 0) & (targets < resolution), axis=2)

    flat = np.ravel_multi_index(
        tuple(np.clip(targets, 0, resolution - 1).reshape(-1, grid.n).T),
        grid.resolution
    ).reshape(count, len(offsets))
    target_interior = grid.box_to_interior()[flat]

    candidate = inside & (target_interior >= 0)
    rows = np.broadcast_to(np.arange(count)[:, None], candidate.shape)[candidate]
    which = np.broadcast_to(np.arange(len(offsets))[None, :], candidate.shape)[candidate]
    cols = target_interior[candidate]

    points = grid.interior_points()
    deltas = offsets[which] * grid.spacing
    midpoints = (points[rows] + points[cols]) / 2

    # columns of Bt are X_iI(m)
    Bt = np.transpose(frame.coeff_at(midpoints), (0, 2, 1))
    pinv = np.linalg.pinv(Bt, rcond=PINV_RCOND)
    controls = np.einsum("emk,ek->em", pinv, deltas)
    residual = np.linalg.norm(np.einsum("ekm,em->ek", Bt, controls) - deltas, axis=1)
    keep = residual <= span_tol * np.linalg.norm(deltas, axis=1)

    rows, cols = rows[keep], cols[keep]
    costs = np.linalg.norm(controls[keep], axis=1)

    adjacency = sparse.csr_matrix((costs, (rows, cols)), shape=(count, count))
    logger.info(
        f"Reachability graph for '{frame.label}': {count} nodes, {adjacency.nnz} edges, "
        f"stencil radius {stencil_radius}"
    )
    return ReachabilityGraph(grid=grid, adjacency=adjacency, stencil_radius=stencil_radius, span_tol=span_tol)


def control_distance_field(g: ReachabilityGraph, source: int) -> DistanceField:
    """
    Shortest-path approximation of d_X(source, .)

    Args:
        g: Reachability graph
        source: Interior index of the source node

    Returns:
        DistanceField (unreachable nodes carry +inf)
    """
    if not 0 <= source < g.grid.n_interior:
        raise PreconditionError(f"source {source} is not an interior node")

    values = csgraph.dijkstra(g.adjacency, directed=True, indices=source)
    reached = np.isfinite(values).sum()
    logger.debug(f"Distance field from node {source}: {reached}/{values.size} nodes reachable")
    return DistanceField(grid=g.grid, source=int(source), values=np.asarray(values, dtype=float))


def metric_ball(df: DistanceField, r: float) -> np.ndarray:
    """Interior indices of B_X(source, r) = {y: d_X(source, y) < r}"""
    if not r > 0:
        raise ParameterError(f"ball radius must be positive, got {r}")
    return np.flatnonzero(df.values < r)


def richardson_extrapolate(coarse, fine, ratio: float = 2.0, order: float = 1.0) -> np.ndarray:
    """Combine values at spacings h and h/ratio assuming an O(h^order) error"""
    factor = ratio ** order
    return (factor * np.asarray(fine, dtype=float) - np.asarray(coarse, dtype=float)) / (factor - 1)


def scaling_exponent(scales: Sequence[float], distances: Sequence[float]) -> float:
    """Least-squares slope of log(distance) against log(scale)"""
    slope, _ = np.polyfit(np.log(np.asarray(scales)), np.log(np.asarray(distances)), 1)
    return float(slope)


def locate_node(grid: Grid, point) -> int:
    """Interior index of the lattice node at point"""
    return grid.locate(point)
