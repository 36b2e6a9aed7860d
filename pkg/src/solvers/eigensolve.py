"""
First eigenpair of the discrete p-Laplacian by Rayleigh-quotient minimization

solve_p2 handles the linear case with shifted inverse iteration on the
stiffness matrix; solve_p minimizes the p-energy over the unit L^p sphere
with a preconditioned projected gradient and an Armijo line search on the
Rayleigh quotient.
"""

import logging
from dataclasses import dataclass
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse
from scipy.sparse.linalg import cg, splu

from src.discretize.grid import Grid
from src.discretize.operators import (
    ScalarField,
    discrete_gradient,
    lp_norm,
    p_laplacian_apply,
    rayleigh_quotient,
    stiffness_matrix,
)
from src.geometry.frames import VectorFieldFrame
from src.utils.errors import (
    DivergenceError,
    ParameterError,
    PreconditionError,
    SolverNonConvergenceError,
)

logger = logging.getLogger(__name__)

# preconditioner weights use (|Xu|^2 + delta^2), delta relative to max |Xu|
PRECONDITIONER_DELTA = 1e-3
# the inverse-iteration shift switches on once R changes by less than this
SHIFT_TRIGGER = 1e-2
SHIFT_FRACTION = 0.5
# a stalled line search is accepted below this relative residual
STALL_RESIDUAL = 1e-4


class SolverConfig(BaseModel):
    """Eigen-solver parameters"""

    model_config = ConfigDict(extra="forbid")

    p: float = Field(default=2.0, gt=1)
    tol_rel: float = Field(default=1e-10, gt=0)
    tol_res: float = Field(default=1e-6, gt=0)
    max_iter: int = Field(default=10000, ge=1)
    seed: int = 0
    n_inits: int = Field(default=1, ge=1)
    init: Literal["positive_bump", "random", "linear_eigvec"] = "positive_bump"

    # backtracking
    step_init: float = Field(default=1.0, gt=0)
    step_shrink: float = Field(default=0.5, gt=0, lt=1)
    armijo_c: float = Field(default=1e-4, gt=0, lt=1)
    min_step: float = Field(default=1e-12, gt=0)

    # inner linear solves of the p = 2 path
    inner_tol: float = Field(default=1e-12, gt=0)
    inner_max_iter: int = Field(default=20000, ge=1)

    eps_reg: Optional[float] = Field(default=None, gt=0)


@dataclass(frozen=True, eq=False)
class EigenResult:
    """
    Converged eigenpair

    For mode 1, u1 is sign-normalized with ||u1||_p = 1 and lambda1 equals its
    Rayleigh quotient. second_mode_p2 returns mode 2 and stores the second
    pair in the same fields.
    """

    p: float
    lambda1: float
    u1: ScalarField
    residual: float
    iterations: int
    trajectory: Tuple[float, ...] = ()
    mode: int = 1
    method: str = ""

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise ParameterError(f"eigenvalue must be positive, got {self.lambda1}")

    @property
    def poincare_constant(self) -> float:
        return 1.0 / self.lambda1

    @property
    def eigenvalue(self) -> float:
        return self.lambda1

    @property
    def eigenfunction(self) -> ScalarField:
        return self.u1


def p_star(p: float, Q: int) -> float:
    """Sobolev-type exponent: Qp/(Q-p) below Q, 2p from Q on"""
    if p <= 1:
        raise ParameterError(f"p must be > 1, got {p}")
    if Q < 1:
        raise ParameterError(f"Q must be >= 1, got {Q}")
    if p < Q:
        return Q * p / (Q - p)
    return 2.0 * p


def lower_bound_constant(lambda1: float, volume: float, p: float, Q: int) -> float:
    """Smallest C with lambda1 >= 1 / (C |Omega|^(1 - p/p*))"""
    if not lambda1 > 0 or not volume > 0:
        raise ParameterError("lambda1 and volume must be positive")
    return 1.0 / (lambda1 * volume ** (1.0 - p / p_star(p, Q)))


def _signed_power(u: np.ndarray, p: float) -> np.ndarray:
    """|u|^(p-2) u, zero at u = 0"""
    return np.sign(u) * np.abs(u) ** (p - 1)


def _vol_norm(r: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(np.dot(r, r) * grid.cell_volume))


def _normalize(u: np.ndarray, grid: Grid, p: float) -> np.ndarray:
    norm = lp_norm(ScalarField(grid, u), p)
    if norm == 0:
        raise PreconditionError("cannot normalize the zero field")
    return u / norm


def _check_pair(frame: VectorFieldFrame, grid: Grid):
    if frame.n != grid.n:
        raise ParameterError(f"frame '{frame.label}' is {frame.n}D, grid is {grid.n}D")


def positive_bump(grid: Grid) -> np.ndarray:
    """Product of per-axis parabolas vanishing on the box boundary"""
    pts = grid.interior_points()
    low, high = grid.bounds[:, 0], grid.bounds[:, 1]
    return np.prod((pts - low) * (high - pts), axis=1)


def initial_field(
    frame: VectorFieldFrame,
    grid: Grid,
    cfg: SolverConfig,
    kind: Optional[str] = None,
    seed: Optional[int] = None
) -> np.ndarray:
    """Strictly positive starting vector"""
    kind = kind or cfg.init
    seed = cfg.seed if seed is None else seed

    if kind == "positive_bump":
        return positive_bump(grid)
    if kind == "random":
        rng = np.random.default_rng(seed)
        return positive_bump(grid) * rng.uniform(0.1, 1.0, grid.n_interior)
    if kind == "linear_eigvec":
        linear = cfg.model_copy(update={"p": 2.0, "init": "positive_bump"})
        return solve_p2(frame, grid, linear).u1.values
    raise ParameterError(f"unknown initializer '{kind}'")


def residual(
    frame: VectorFieldFrame,
    grid: Grid,
    u: ScalarField,
    lam: float,
    p: float,
    eps_reg: Optional[float] = None
) -> float:
    """
    Weak-form eigen-residual

    Args:
        frame: Vector-field frame
        grid: Grid of u
        u: Field with ||u||_p = 1
        lam: Candidate eigenvalue
        p: Exponent

    Returns:
        Cell-volume-weighted L2 norm of Delta_p u - lam |u|^(p-2) u
    """
    norm = lp_norm(u, p)
    if abs(norm - 1.0) > 1e-8:
        raise PreconditionError(f"residual needs ||u||_p = 1, got {norm:.12g}")
    r = p_laplacian_apply(frame, grid, u, p, eps_reg).values - lam * _signed_power(u.values, p)
    return _vol_norm(r, grid)


def _finalize(
    frame: VectorFieldFrame,
    grid: Grid,
    u: np.ndarray,
    p: float,
    mode: int,
    iterations: int,
    trajectory: List[float],
    method: str,
    eps_reg: Optional[float] = None
) -> EigenResult:
    if u.sum() < 0:
        u = -u
    u = _normalize(u, grid, p)
    field_u = ScalarField(grid, u)

    if mode == 1 and u.min() < 0:
        logger.warning(f"First eigenfunction has negative nodes (min {u.min():.3e})")

    lam = rayleigh_quotient(frame, grid, field_u, p)
    res = residual(frame, grid, field_u, lam, p, eps_reg)
    return EigenResult(
        p=p,
        lambda1=lam,
        u1=field_u,
        residual=res,
        iterations=iterations,
        trajectory=tuple(trajectory),
        mode=mode,
        method=method
    )


def _inverse_iteration(
    K: sparse.csr_matrix,
    grid: Grid,
    u: np.ndarray,
    cfg: SolverConfig,
    deflate: Optional[np.ndarray] = None,
    shift: float = 0.0
) -> Tuple[np.ndarray, int, List[float]]:
    """Shifted inverse power iteration with Jacobi-preconditioned CG solves"""
    vol = grid.cell_volume
    identity = sparse.identity(K.shape[0], format="csr")

    def project(v: np.ndarray) -> np.ndarray:
        if deflate is None:
            return v
        return v - np.dot(v, deflate) * vol * deflate

    u = project(u)
    u = u / _vol_norm(u, grid)
    lam = float(np.dot(u, K @ u) / np.dot(u, u))
    trajectory = [lam]
    locked = shift > 0

    for it in range(1, cfg.max_iter + 1):
        A = K - shift * identity if shift else K
        M = sparse.diags(1.0 / A.diagonal())
        y, info = cg(A, u, x0=u / max(lam - shift, 1e-300), rtol=cfg.inner_tol, atol=0.0,
                     maxiter=cfg.inner_max_iter, M=M)
        if info != 0:
            inner = float(np.linalg.norm(A @ y - u) / np.linalg.norm(u))
            raise SolverNonConvergenceError(
                f"inner CG solve did not converge (info={info})",
                trajectory=trajectory,
                last_residual=inner
            )

        y = project(y)
        u_new = y / _vol_norm(y, grid)
        lam_new = float(np.dot(u_new, K @ u_new) / np.dot(u_new, u_new))
        res = _vol_norm(K @ u_new - lam_new * u_new, grid)
        rel = abs(lam - lam_new) / lam_new
        trajectory.append(lam_new)
        u, lam = u_new, lam_new
        logger.debug(f"inverse iteration {it}: R={lam:.15g} rel={rel:.3e} res={res:.3e}")

        if rel < cfg.tol_rel and res < cfg.tol_res:
            return u, it, trajectory
        if not locked and rel < SHIFT_TRIGGER:
            shift = SHIFT_FRACTION * lam
            locked = True

    raise SolverNonConvergenceError(
        f"inverse iteration did not converge in {cfg.max_iter} iterations",
        trajectory=trajectory,
        last_residual=res
    )


def solve_p2(frame: VectorFieldFrame, grid: Grid, cfg: SolverConfig) -> EigenResult:
    """
    Smallest eigenpair of the stiffness matrix K = X^* X

    Args:
        frame: Vector-field frame
        grid: Grid (Dirichlet outside Omega)
        cfg: Solver configuration with p = 2

    Returns:
        EigenResult with ||u1||_2 = 1 and u1 >= 0
    """
    if cfg.p != 2:
        raise ParameterError(f"solve_p2 needs p = 2, got {cfg.p}")
    _check_pair(frame, grid)

    logger.info(f"Solving p=2 on '{frame.label}' {grid.resolution} ({grid.n_interior} nodes)")
    K = stiffness_matrix(frame, grid)
    start = initial_field(frame, grid, cfg, kind="random" if cfg.init == "random" else "positive_bump")
    u, iterations, trajectory = _inverse_iteration(K, grid, start, cfg)

    result = _finalize(frame, grid, u, 2.0, 1, iterations, trajectory, "inverse_iteration")
    logger.info(f"lambda1={result.lambda1:.12g} after {iterations} iterations (residual {result.residual:.2e})")
    return result


def second_mode_p2(frame: VectorFieldFrame, grid: Grid, cfg: SolverConfig, first: EigenResult) -> EigenResult:
    """
    Second eigenpair at p = 2 by inverse iteration deflated against u1

    Returns:
        EigenResult with mode = 2; the field changes sign
    """
    if cfg.p != 2 or first.p != 2:
        raise ParameterError("second_mode_p2 needs p = 2")
    if first.u1.grid is not grid:
        raise ParameterError("first eigenpair lives on a different grid")

    K = stiffness_matrix(frame, grid)
    u1 = first.u1.values / _vol_norm(first.u1.values, grid)
    rng = np.random.default_rng(cfg.seed + 1)
    start = rng.standard_normal(grid.n_interior) * positive_bump(grid)

    u, iterations, trajectory = _inverse_iteration(
        K, grid, start, cfg, deflate=u1, shift=SHIFT_FRACTION * first.lambda1
    )
    result = _finalize(frame, grid, u, 2.0, 2, iterations, trajectory, "deflated_inverse_iteration")
    logger.info(f"lambda2={result.lambda1:.12g} (lambda2/lambda1={result.lambda1 / first.lambda1:.6g})")
    return result


def _relative_residual(r: np.ndarray, u: np.ndarray, lam: float, p: float, grid: Grid) -> float:
    """Residual norm relative to lam || |u|^(p-2) u ||"""
    return _vol_norm(r, grid) / (lam * _vol_norm(_signed_power(u, p), grid))


def _descend(
    frame: VectorFieldFrame,
    grid: Grid,
    cfg: SolverConfig,
    start: np.ndarray
) -> Tuple[np.ndarray, int, List[float]]:
    p = cfg.p
    dg = discrete_gradient(frame, grid)
    vol = grid.cell_volume

    u = _normalize(start, grid, p)
    lam = dg.energy(u, p)
    trajectory = [lam]
    last_rel = np.inf
    linear_lu = None

    for it in range(1, cfg.max_iter + 1):
        r = dg.p_laplacian(u, p, cfg.eps_reg) - lam * _signed_power(u, p)
        res = _vol_norm(r, grid)
        rel_res = _relative_residual(r, u, lam, p, grid)
        if last_rel < cfg.tol_rel and rel_res < cfg.tol_res:
            return u, it - 1, trajectory

        if p == 2:
            if linear_lu is None:
                linear_lu = splu(dg.stiffness.tocsc())
            lu = linear_lu
        else:
            plus, minus = dg.apply(u)
            scale = max(np.linalg.norm(plus, axis=1).max(), np.linalg.norm(minus, axis=1).max())
            w_plus, w_minus = dg.weights(u, p, PRECONDITIONER_DELTA * scale)
            lu = splu(dg.weighted_operator(w_plus, w_minus).tocsc())
        d = -lu.solve(r)
        slope = p * vol * float(np.dot(r, d))

        t = cfg.step_init
        accepted = None
        while t >= cfg.min_step:
            candidate = u + t * d
            norm = lp_norm(ScalarField(grid, candidate), p) if np.all(np.isfinite(candidate)) else np.nan
            if not np.isfinite(norm):
                raise DivergenceError("iterate became non-finite", trajectory=trajectory, last_residual=res)
            if norm > 0:
                candidate = candidate / norm
                energy = dg.energy(candidate, p)
                if not np.isfinite(energy):
                    raise DivergenceError("p-energy became non-finite", trajectory=trajectory, last_residual=res)
                if energy < lam and energy <= lam + cfg.armijo_c * t * slope:
                    accepted = (candidate, energy)
                    break
            t *= cfg.step_shrink

        if accepted is None:
            if rel_res < cfg.tol_res:
                return u, it - 1, trajectory
            if rel_res < STALL_RESIDUAL:
                logger.warning(
                    f"line search stalled at iteration {it}; accepting R={lam:.15g} "
                    f"(relative residual {rel_res:.3e}, last decrease {last_rel:.3e})"
                )
                return u, it - 1, trajectory
            raise SolverNonConvergenceError(
                f"line search stalled at iteration {it} (relative residual {rel_res:.3e})",
                trajectory=trajectory,
                last_residual=res
            )

        u, energy = accepted
        last_rel = (lam - energy) / energy
        lam = energy
        trajectory.append(lam)
        logger.debug(f"descent {it}: R={lam:.15g} step={t:.3g} rel={last_rel:.3e} res={res:.3e}")

    raise SolverNonConvergenceError(
        f"projected gradient did not converge in {cfg.max_iter} iterations",
        trajectory=trajectory,
        last_residual=res
    )


def solve_p(frame: VectorFieldFrame, grid: Grid, cfg: SolverConfig, u0: Optional[np.ndarray] = None) -> EigenResult:
    """
    Minimize the p-energy over ||u||_p = 1

    Args:
        frame: Vector-field frame
        grid: Grid (Dirichlet outside Omega)
        cfg: Solver configuration
        u0: Optional starting vector on the interior nodes; overrides cfg.init

    Returns:
        EigenResult with the lowest Rayleigh value over cfg.n_inits starts
    """
    _check_pair(frame, grid)
    logger.info(
        f"Solving p={cfg.p:g} on '{frame.label}' {grid.resolution} "
        f"({grid.n_interior} nodes, {cfg.n_inits} start(s))"
    )

    best = None
    for j in range(cfg.n_inits):
        if j == 0 and u0 is not None:
            start = np.asarray(u0, dtype=float)
            if start.shape != (grid.n_interior,):
                raise ParameterError(f"u0 has shape {start.shape}, expected ({grid.n_interior},)")
        elif j == 0:
            start = initial_field(frame, grid, cfg)
        else:
            start = initial_field(frame, grid, cfg, kind="random", seed=cfg.seed + j)

        u, iterations, trajectory = _descend(frame, grid, cfg, start)
        candidate = _finalize(frame, grid, u, cfg.p, 1, iterations, trajectory, "projected_gradient", cfg.eps_reg)
        if best is None or candidate.lambda1 < best.lambda1:
            best = candidate

    logger.info(f"lambda1={best.lambda1:.12g} after {best.iterations} iterations (residual {best.residual:.2e})")
    return best


def solve(frame: VectorFieldFrame, grid: Grid, cfg: SolverConfig) -> EigenResult:
    """Linear fast path at p = 2, projected gradient otherwise"""
    if cfg.p == 2 and cfg.n_inits == 1:
        return solve_p2(frame, grid, cfg)
    return solve_p(frame, grid, cfg)
