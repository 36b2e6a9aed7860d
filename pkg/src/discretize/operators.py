"""
Discrete horizontal gradient, its exact adjoint, and the p-energy

The gradient is sampled twice per lattice node, once with forward and once
with backward differences along every axis (zero extension outside Omega,
coefficients taken at the node). Each sample carries half the cell volume in
every integral. The mean of the two samples at an interior node is the central
difference X_i u; the adjoint is the matrix transpose under the weighted inner
product, so summation by parts is exact and the euclidean frame reproduces
the standard (2n+1)-point Laplacian.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import sparse

from src.discretize.grid import Grid
from src.geometry.frames import VectorFieldFrame
from src.utils.errors import ParameterError, PreconditionError

logger = logging.getLogger(__name__)

# relative size of the p < 2 weight regularization
EPS_REG_FACTOR = 1e-10


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values on the interior of a grid; exterior values are implicitly 0"""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_interior,):
            raise ParameterError(
                f"scalar field has shape {values.shape}, grid has {self.grid.n_interior} interior nodes"
            )
        if not np.all(np.isfinite(values)):
            raise ParameterError("scalar field has non-finite values")
        object.__setattr__(self, "values", values)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, c * self.values)

    __rmul__ = __mul__

    def __abs__(self) -> "ScalarField":
        return ScalarField(self.grid, np.abs(self.values))

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def inner(self, other: "ScalarField") -> float:
        return float(np.dot(self.values, other.values) * self.grid.cell_volume)


@dataclass(frozen=True, eq=False)
class HField:
    """
    Horizontal-gradient samples on every box node

    plus / minus hold (X_1 u, ..., X_m u) from forward / backward differences,
    each of shape (box nodes, m).
    """

    grid: Grid
    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        if self.plus.shape != self.minus.shape or self.plus.shape[0] != self.grid.box_size:
            raise ParameterError(f"HField samples have shapes {self.plus.shape}, {self.minus.shape}")
        if not (np.all(np.isfinite(self.plus)) and np.all(np.isfinite(self.minus))):
            raise ParameterError("HField has non-finite values")

    @property
    def m(self) -> int:
        return self.plus.shape[1]

    def central(self) -> np.ndarray:
        """Central-difference X u at interior nodes, shape (interior nodes, m)"""
        return 0.5 * (self.plus + self.minus)[self.grid.interior_index]

    def __mul__(self, c: float) -> "HField":
        return HField(self.grid, c * self.plus, c * self.minus)

    __rmul__ = __mul__

    def inner(self, other: "HField") -> float:
        total = np.sum(self.plus * other.plus) + np.sum(self.minus * other.minus)
        return float(0.5 * self.grid.cell_volume * total)

    @classmethod
    def zeros(cls, grid: Grid, m: int) -> "HField":
        return cls(grid, np.zeros((grid.box_size, m)), np.zeros((grid.box_size, m)))


def _one_sided(grid: Grid, axis: int, direction: int) -> sparse.csr_matrix:
    """(box nodes x interior nodes) forward (+1) or backward (-1) difference along an axis"""
    lookup = grid.box_to_interior()
    index = np.arange(grid.box_size).reshape(grid.resolution)
    h = grid.spacing[axis]

    neighbor = np.full(grid.resolution, -1, dtype=np.int64)
    target = [slice(None)] * grid.n
    source = [slice(None)] * grid.n
    if direction > 0:
        target[axis], source[axis] = slice(0, -1), slice(1, None)
    else:
        target[axis], source[axis] = slice(1, None), slice(0, -1)
    neighbor[tuple(target)] = index[tuple(source)]
    neighbor = neighbor.ravel()

    own_rows = np.flatnonzero(lookup >= 0)
    neighbor_cols = np.where(neighbor >= 0, lookup[neighbor], -1)
    nb_rows = np.flatnonzero(neighbor_cols >= 0)

    rows = np.concatenate([own_rows, nb_rows])
    cols = np.concatenate([lookup[own_rows], neighbor_cols[nb_rows]])
    vals = np.concatenate([
        np.full(own_rows.size, -direction / h),
        np.full(nb_rows.size, direction / h)
    ])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(grid.box_size, grid.n_interior))


class DiscreteGradient:
    """
    Assembled one-sided horizontal gradients of a frame on a grid

    G_plus / G_minus map interior values to stacked components, row
    i * (box nodes) + b holding X_i u at box node b.
    """

    def __init__(self, frame: VectorFieldFrame, grid: Grid):
        if frame.n != grid.n:
            raise ParameterError(f"frame '{frame.label}' is {frame.n}D, grid is {grid.n}D")

        self.frame = frame
        self.grid = grid
        self.m = frame.m

        coeffs = frame.coeff_at(grid.box_points())
        self.G_plus = self._assemble(coeffs, +1)
        self.G_minus = self._assemble(coeffs, -1)
        logger.debug(
            f"Assembled gradient of '{frame.label}' on {grid.resolution}: "
            f"nnz={self.G_plus.nnz + self.G_minus.nnz}"
        )

    def _assemble(self, coeffs: np.ndarray, direction: int) -> sparse.csr_matrix:
        diffs = [_one_sided(self.grid, k, direction) for k in range(self.grid.n)]
        blocks = []
        for i in range(self.m):
            block = sparse.diags(coeffs[:, i, 0]) @ diffs[0]
            for k in range(1, self.grid.n):
                block = block + sparse.diags(coeffs[:, i, k]) @ diffs[k]
            blocks.append(block)
        return sparse.vstack(blocks, format="csr")

    def _split(self, flat: np.ndarray) -> np.ndarray:
        return flat.reshape(self.m, self.grid.box_size).T

    def apply(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self._split(self.G_plus @ u), self._split(self.G_minus @ u)

    def adjoint(self, plus: np.ndarray, minus: np.ndarray) -> np.ndarray:
        return 0.5 * (self.G_plus.T @ plus.T.ravel() + self.G_minus.T @ minus.T.ravel())

    def energy(self, u: np.ndarray, p: float) -> float:
        plus, minus = self.apply(u)
        return sample_energy(plus, minus, p, self.grid.cell_volume)

    def weights(self, u: np.ndarray, p: float, eps: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Nodal weights |Xu|^(p-2), or (|Xu|^2 + eps^2)^((p-2)/2) when eps is given"""
        plus, minus = self.apply(u)
        return _weights(np.linalg.norm(plus, axis=1), p, eps), _weights(np.linalg.norm(minus, axis=1), p, eps)

    def p_laplacian(self, u: np.ndarray, p: float, eps: Optional[float] = None) -> np.ndarray:
        plus, minus = self.apply(u)
        norms_plus = np.linalg.norm(plus, axis=1)
        norms_minus = np.linalg.norm(minus, axis=1)
        if eps is None and p < 2:
            eps = EPS_REG_FACTOR * max(norms_plus.max(initial=0.0), norms_minus.max(initial=0.0))
        w_plus = _weights(norms_plus, p, eps)
        w_minus = _weights(norms_minus, p, eps)
        return self.adjoint(w_plus[:, None] * plus, w_minus[:, None] * minus)

    def weighted_operator(self, w_plus: np.ndarray, w_minus: np.ndarray) -> sparse.csr_matrix:
        """Sparse matrix of u -> X^*(w X u)"""
        W_plus = sparse.diags(np.tile(w_plus, self.m))
        W_minus = sparse.diags(np.tile(w_minus, self.m))
        A = 0.5 * (self.G_plus.T @ W_plus @ self.G_plus + self.G_minus.T @ W_minus @ self.G_minus)
        return A.tocsr()

    @property
    def stiffness(self) -> sparse.csr_matrix:
        ones = np.ones(self.grid.box_size)
        return self.weighted_operator(ones, ones)


def _weights(norms: np.ndarray, p: float, eps: Optional[float]) -> np.ndarray:
    if p == 2:
        return np.ones_like(norms)
    if eps:
        return (norms ** 2 + eps ** 2) ** ((p - 2) / 2)
    with np.errstate(divide="ignore"):
        # w * Xu -> 0 where Xu = 0 for every p > 1
        return np.where(norms > 0, norms ** (p - 2), 0.0)


def sample_energy(plus: np.ndarray, minus: np.ndarray, p: float, cell_volume: float) -> float:
    total = np.sum(np.linalg.norm(plus, axis=1) ** p) + np.sum(np.linalg.norm(minus, axis=1) ** p)
    return float(0.5 * cell_volume * total)


@lru_cache(maxsize=16)
def discrete_gradient(frame: VectorFieldFrame, grid: Grid) -> DiscreteGradient:
    """Cached assembly per (frame, grid)"""
    return DiscreteGradient(frame, grid)


def _check_grid(u: ScalarField, grid: Grid):
    if u.grid is not grid:
        raise ParameterError("field lives on a different grid")


def horizontal_gradient(frame: VectorFieldFrame, grid: Grid, u: ScalarField) -> HField:
    """
    Horizontal gradient (X_1 u, ..., X_m u)

    Args:
        frame: Vector-field frame
        grid: Grid of u
        u: Scalar field

    Returns:
        HField; HField.central() gives the central-difference values at interior nodes
    """
    _check_grid(u, grid)
    plus, minus = discrete_gradient(frame, grid).apply(u.values)
    return HField(grid, plus, minus)


def adjoint_apply(frame: VectorFieldFrame, grid: Grid, v: HField) -> ScalarField:
    """Sum_i X_i^* v_i, the exact transpose of horizontal_gradient"""
    return ScalarField(grid, discrete_gradient(frame, grid).adjoint(v.plus, v.minus))


def p_energy(v: HField, p: float) -> float:
    """E = integral of |v|^p"""
    if p <= 1:
        raise ParameterError(f"p-energy needs p > 1, got {p}")
    return sample_energy(v.plus, v.minus, p, v.grid.cell_volume)


def lp_norm(u: ScalarField, p: float) -> float:
    """||u||_p with cell-volume quadrature"""
    if p < 1:
        raise ParameterError(f"L^p norm needs p >= 1, got {p}")
    return float((np.sum(np.abs(u.values) ** p) * u.grid.cell_volume) ** (1.0 / p))


def rayleigh_quotient(frame: VectorFieldFrame, grid: Grid, u: ScalarField, p: float) -> float:
    """R(u) = integral |Xu|^p / integral |u|^p"""
    denominator = lp_norm(u, p) ** p
    if denominator == 0:
        raise PreconditionError("Rayleigh quotient undefined for u = 0: u must be a nonzero admissible field")
    return p_energy(horizontal_gradient(frame, grid, u), p) / denominator


def p_laplacian_apply(
    frame: VectorFieldFrame,
    grid: Grid,
    u: ScalarField,
    p: float,
    eps_reg: Optional[float] = None
) -> ScalarField:
    """
    Sum_i X_i^*(|Xu|^(p-2) X_i u)

    For p < 2 the weight is (|Xu|^2 + eps_reg^2)^((p-2)/2); eps_reg defaults to
    1e-10 times the largest nodal |Xu|. For p >= 2 no regularization is applied.
    """
    if p <= 1:
        raise ParameterError(f"p-Laplacian needs p > 1, got {p}")
    _check_grid(u, grid)
    return ScalarField(grid, discrete_gradient(frame, grid).p_laplacian(u.values, p, eps_reg))


def stiffness_matrix(frame: VectorFieldFrame, grid: Grid) -> sparse.csr_matrix:
    """K with adjoint_apply(horizontal_gradient(u)) = K u"""
    return discrete_gradient(frame, grid).stiffness


def poincare_norm(frame: VectorFieldFrame, grid: Grid, u: ScalarField, p: float) -> float:
    """||Xu||_p"""
    return p_energy(horizontal_gradient(frame, grid, u), p) ** (1.0 / p)


def natural_norm(frame: VectorFieldFrame, grid: Grid, u: ScalarField, p: float) -> float:
    """(||u||_p^p + ||Xu||_p^p)^(1/p)"""
    return (lp_norm(u, p) ** p + poincare_norm(frame, grid, u, p) ** p) ** (1.0 / p)


def sample_field(grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> ScalarField:
    """Evaluate fn on the (interior nodes, n) coordinate array"""
    return ScalarField(grid, np.asarray(fn(grid.interior_points()), dtype=float))
