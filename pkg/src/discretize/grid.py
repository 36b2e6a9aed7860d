import logging
from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage

from src.utils.errors import ParameterError, PreconditionError, StructuralError

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 4


class DomainSpec(BaseModel):
    """
    Box [low, high]^n with an optional mask predicate

    mask:
        "none"   - the open box
        "disk"   - |x - center| < radius
        "subbox" - low'_k < x_k < high'_k for inner_bounds
    """

    model_config = ConfigDict(extra="forbid")

    bounds: List[Tuple[float, float]]
    mask: Literal["none", "disk", "subbox"] = "none"
    center: Optional[List[float]] = None
    radius: Optional[float] = Field(default=None, gt=0)
    inner_bounds: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def _check_shape(self):
        if not self.bounds:
            raise ValueError("bounds must name at least one axis")
        for low, high in self.bounds:
            if not high > low:
                raise ValueError(f"empty axis interval ({low}, {high})")
        if self.mask == "disk":
            if self.radius is None:
                raise ValueError("disk mask needs a radius")
            if self.center is not None and len(self.center) != self.dim:
                raise ValueError(f"disk center has {len(self.center)} coordinates, domain has {self.dim}")
        if self.mask == "subbox":
            if self.inner_bounds is None or len(self.inner_bounds) != self.dim:
                raise ValueError("subbox mask needs inner_bounds for every axis")
        return self

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def predicate(self) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        """Vectorized membership test on node centers, or None for the plain box"""
        if self.mask == "disk":
            center = np.asarray(
                self.center if self.center is not None else [(lo + hi) / 2 for lo, hi in self.bounds]
            )
            radius = self.radius
            return lambda pts: np.linalg.norm(pts - center, axis=1) < radius
        if self.mask == "subbox":
            inner = np.asarray(self.inner_bounds, dtype=float)
            return lambda pts: np.all((pts > inner[:, 0]) & (pts < inner[:, 1]), axis=1)
        return None


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Rectangular lattice with an interior mask Omega

    Nodes are indexed lexicographically (C order). The outermost layer of the
    box is always exterior, which realizes u = 0 on the boundary.
    """

    bounds: np.ndarray          # (n, 2)
    resolution: Tuple[int, ...]
    spacing: np.ndarray         # (n,)
    interior_mask: np.ndarray   # bool, shape resolution

    @property
    def n(self) -> int:
        return len(self.resolution)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def box_size(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def interior_index(self) -> np.ndarray:
        """Box (flat) indices of the interior nodes, ascending"""
        return np.flatnonzero(self.interior_mask.ravel())

    @property
    def n_interior(self) -> int:
        return int(self.interior_mask.sum())

    @property
    def volume(self) -> float:
        """|Omega| as interior node count times cell volume"""
        return self.n_interior * self.cell_volume

    def axes(self) -> List[np.ndarray]:
        return [
            np.linspace(lo, hi, res)
            for (lo, hi), res in zip(self.bounds, self.resolution)
        ]

    def box_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def interior_points(self) -> np.ndarray:
        return self.box_points()[self.interior_index]

    def midpoints(self) -> np.ndarray:
        """Centers of the cells whose 2^n corners are all interior nodes"""
        full = self.interior_mask
        for axis in range(self.n):
            full = full[(slice(None),) * axis + (slice(0, -1),)] & full[(slice(None),) * axis + (slice(1, None),)]
        cells = np.argwhere(full)
        return self.bounds[:, 0] + (cells + 0.5) * self.spacing

    def sample_points(self) -> np.ndarray:
        """Interior nodes followed by cell midpoints"""
        return np.vstack([self.interior_points(), self.midpoints()])

    def box_to_interior(self) -> np.ndarray:
        """Map from box index to interior index, -1 for exterior nodes"""
        lookup = np.full(self.box_size, -1, dtype=np.int64)
        lookup[self.interior_index] = np.arange(self.n_interior)
        return lookup

    def with_mask(self, mask: np.ndarray) -> "Grid":
        """Same lattice, different Omega"""
        return _finalize(self.bounds, self.resolution, self.spacing, np.asarray(mask, dtype=bool))

    def refined(self) -> "Grid":
        """
        Halved spacing, resolution 2r - 1 per axis

        Every coarse node is a fine node. A new node is interior iff all
        corners of the coarse cell (or face) it sits in are interior, so
        the refined Omega lies inside the coarse one.
        """
        mask = self.interior_mask
        for axis in range(self.n):
            coarse = np.moveaxis(mask, axis, 0)
            fine = np.zeros((2 * coarse.shape[0] - 1,) + coarse.shape[1:], dtype=bool)
            fine[0::2] = coarse
            fine[1::2] = coarse[:-1] & coarse[1:]
            mask = np.moveaxis(fine, 0, axis)
        resolution = tuple(2 * r - 1 for r in self.resolution)
        return _finalize(self.bounds, resolution, self.spacing / 2, mask)

    def locate(self, point, tol: float = 1e-9) -> int:
        """
        Interior index of the lattice node at a point

        Raises:
            PreconditionError: point off the lattice or outside Omega
        """
        point = np.asarray(point, dtype=float).reshape(-1)
        if point.size != self.n:
            raise PreconditionError(f"point {point.tolist()} has wrong dimension for a {self.n}D grid")

        steps = (point - self.bounds[:, 0]) / self.spacing
        multi = np.rint(steps).astype(int)
        if np.any(np.abs(steps - multi) > tol) or np.any(multi < 0) or np.any(multi >= self.resolution):
            raise PreconditionError(f"point {point.tolist()} is not a lattice node")

        flat = int(np.ravel_multi_index(tuple(multi), self.resolution))
        idx = self.box_to_interior()[flat]
        if idx < 0:
            raise PreconditionError(f"point {point.tolist()} lies outside Omega")
        return int(idx)


def _finalize(bounds, resolution, spacing, mask: np.ndarray) -> Grid:
    mask = mask.copy()
    for axis in range(mask.ndim):
        index = [slice(None)] * mask.ndim
        index[axis] = 0
        mask[tuple(index)] = False
        index[axis] = -1
        mask[tuple(index)] = False

    if not mask.any():
        raise StructuralError("domain has no interior nodes")

    _, components = ndimage.label(mask)
    if components != 1:
        raise StructuralError(f"interior is not edge-connected ({components} components)")

    return Grid(bounds=bounds, resolution=tuple(resolution), spacing=spacing, interior_mask=mask)


def build_grid(domain: DomainSpec, resolution) -> Grid:
    """
    Lattice over the domain box with the interior mask applied at node centers

    Args:
        domain: Box and optional mask
        resolution: Node count per axis (int for all axes, or one per axis)

    Returns:
        Grid
    """
    if np.isscalar(resolution):
        resolution = [int(resolution)] * domain.dim
    resolution = tuple(int(r) for r in resolution)

    if len(resolution) != domain.dim:
        raise ParameterError(f"resolution {resolution} does not match domain dimension {domain.dim}")
    if min(resolution) < MIN_RESOLUTION:
        raise ParameterError(f"resolution must be >= {MIN_RESOLUTION} per axis, got {resolution}")

    bounds = np.asarray(domain.bounds, dtype=float)
    spacing = (bounds[:, 1] - bounds[:, 0]) / (np.asarray(resolution) - 1)
    mask = np.ones(resolution, dtype=bool)

    predicate = domain.predicate()
    if predicate is not None:
        probe = Grid(bounds=bounds, resolution=resolution, spacing=spacing, interior_mask=mask)
        mask = predicate(probe.box_points()).reshape(resolution)

    grid = _finalize(bounds, resolution, spacing, mask)
    logger.debug(f"Grid {resolution}: {grid.n_interior} interior nodes, |Omega|={grid.volume:.6g}")
    return grid


def box_domain(bounds: Sequence[Tuple[float, float]]) -> DomainSpec:
    return DomainSpec(bounds=[tuple(b) for b in bounds])
