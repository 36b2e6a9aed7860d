"""
Default property battery for one (frame, grid, solver) triple
"""

import logging
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.discretize.grid import Grid
from src.geometry.frames import VectorFieldFrame
from src.geometry.metric import build_reachability_graph, control_distance_field
from src.solvers.eigensolve import EigenResult, SolverConfig, second_mode_p2, solve
from src.utils.errors import PreconditionError, SolverNonConvergenceError, StructuralError
from src.verify.base_check import CheckReport, Verdict
from src.verify.eigenfunction import (
    gap_check,
    monotonicity_check,
    positivity_check,
    sign_change_check,
    simplicity_check,
)
from src.verify.fields import sign_changing_samples
from src.verify.inequalities import convexity_check, lattice_check, poincare_check
from src.verify.regularity import harnack_check, holder_check, refinement_stable

logger = logging.getLogger(__name__)


class SuiteOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    suite: Literal["default", "quick"] = "default"
    convexity_samples: int = Field(default=100000, ge=1)
    poincare_fields: int = Field(default=100, ge=1)
    simplicity_runs: int = Field(default=3, ge=2)
    harnack_radius: float = Field(default=0.1, gt=0)
    holder_alpha: float = Field(default=0.5, gt=0, le=1)
    holder_sources: int = Field(default=4, ge=1)
    source: Optional[List[float]] = None
    stencil_radius: Optional[int] = Field(default=None, ge=1)
    refinement: bool = True


def center_node(grid: Grid) -> int:
    """Interior node closest to the center of the box"""
    center = grid.bounds.mean(axis=1)
    return int(np.argmin(np.linalg.norm(grid.interior_points() - center, axis=1)))


def inner_grid(grid: Grid) -> Optional[Grid]:
    """Same lattice restricted to the centered half-size sub-box, or None if empty"""
    pts = grid.box_points()
    center = grid.bounds.mean(axis=1)
    half = (grid.bounds[:, 1] - grid.bounds[:, 0]) / 4
    inside = np.all(np.abs(pts - center) < half, axis=1).reshape(grid.resolution)
    try:
        return grid.with_mask(inside & grid.interior_mask)
    except StructuralError:
        return None


def exit_code(reports: List[CheckReport]) -> int:
    """0 if every check passed, 1 on any failure, else 2 on any inconclusive"""
    verdicts = {r.verdict for r in reports}
    if Verdict.FAIL in verdicts:
        return 1
    if Verdict.INCONCLUSIVE in verdicts:
        return 2
    return 0


def _inconclusive(name: str, error: Exception) -> CheckReport:
    logger.warning(f"{name}: inconclusive ({error})")
    return CheckReport(
        name=name,
        passed=False,
        statistic=float("nan"),
        threshold=float("nan"),
        details=str(error),
        verdict=Verdict.INCONCLUSIVE
    )


def _guarded(name: str, fn: Callable[[], CheckReport]) -> CheckReport:
    """Run a check; solver trouble or an unmet precondition makes it inconclusive"""
    try:
        return fn()
    except (SolverNonConvergenceError, PreconditionError) as e:
        return _inconclusive(name, e)


def _regularity_reports(
    frame: VectorFieldFrame,
    grid: Grid,
    first: EigenResult,
    sources: np.ndarray,
    options: SuiteOptions
) -> Tuple[CheckReport, CheckReport]:
    """Harnack quotient around the first source, Hölder quotient over all of them"""
    graph = build_reachability_graph(frame, grid, options.stencil_radius)
    dfs = [control_distance_field(graph, grid.locate(x)) for x in sources]
    harnack = _guarded("harnack", lambda: harnack_check(first.u1, dfs[0], options.harnack_radius))
    holder = holder_check(first.u1, dfs, options.holder_alpha)
    return harnack, holder


def _refined_reports(
    frame: VectorFieldFrame,
    grid: Grid,
    cfg: SolverConfig,
    options: SuiteOptions,
    lattice: CheckReport,
    harnack: CheckReport,
    holder: CheckReport,
    sources: np.ndarray
) -> List[CheckReport]:
    """Lattice, Harnack and Hölder statistics again with halved spacing"""
    fine = grid.refined()
    logger.info(f"Refining {grid.resolution} -> {fine.resolution}")
    reports = [
        lattice_check(frame, fine, sign_changing_samples(fine), cfg.p, reference=lattice, name="lattice_refinement")
    ]

    try:
        fine_first = solve(frame, fine, cfg)
    except SolverNonConvergenceError as e:
        return reports + [_inconclusive("harnack_refinement", e), _inconclusive("holder_refinement", e)]

    fine_harnack, fine_holder = _regularity_reports(frame, fine, fine_first, sources, options)
    for coarse, refined in ((harnack, fine_harnack), (holder, fine_holder)):
        name = f"{coarse.name}_refinement"
        if Verdict.INCONCLUSIVE in (coarse.verdict, refined.verdict):
            reports.append(_inconclusive(name, PreconditionError(f"{coarse.name} is inconclusive on one of the grids")))
        else:
            reports.append(refinement_stable([coarse.statistic, refined.statistic], name=name))
    return reports


def run_suite(
    frame: VectorFieldFrame,
    grid: Grid,
    cfg: SolverConfig,
    options: Optional[SuiteOptions] = None
) -> List[CheckReport]:
    """
    Run the property battery

    Args:
        frame: Vector-field frame
        grid: Grid
        cfg: Solver configuration (p, tolerances, seed)
        options: Battery composition and sizes

    Returns:
        One CheckReport per check, in a fixed order
    """
    options = options or SuiteOptions()
    logger.info(f"Running '{options.suite}' suite on '{frame.label}' {grid.resolution}, p={cfg.p:g}")

    reports = [convexity_check(cfg.p, options.convexity_samples, cfg.seed, frame.m)]

    try:
        first: EigenResult = solve(frame, grid, cfg)
    except SolverNonConvergenceError as e:
        reports.append(_inconclusive("eigensolve", e))
        return reports

    reports.append(positivity_check(first))
    reports.append(sign_change_check(first.u1, expect_change=False))
    reports.append(poincare_check(frame, grid, first, options.poincare_fields, cfg.seed))
    lattice = lattice_check(frame, grid, sign_changing_samples(grid), cfg.p)
    reports.append(lattice)

    if options.suite == "quick":
        return reports

    reports.append(_guarded("simplicity", lambda: simplicity_check(frame, grid, cfg, options.simplicity_runs)))

    if cfg.p == 2:
        try:
            second = second_mode_p2(frame, grid, cfg, first)
            reports.append(sign_change_check(second.u1, expect_change=True, name="sign_change_mode2"))
            reports.append(gap_check(first, second))
        except SolverNonConvergenceError as e:
            reports.append(_inconclusive("gap", e))

    source = grid.locate(options.source) if options.source is not None else center_node(grid)
    rng = np.random.default_rng(cfg.seed)
    extra = rng.choice(grid.n_interior, size=min(options.holder_sources - 1, grid.n_interior), replace=False)
    sources = grid.interior_points()[[source] + [int(s) for s in extra]]

    harnack, holder = _regularity_reports(frame, grid, first, sources, options)
    reports.extend([harnack, holder])

    inner = inner_grid(grid)
    if inner is not None:
        reports.append(_guarded("monotonicity", lambda: monotonicity_check(frame, cfg, inner, grid)))

    if options.refinement:
        reports.extend(_refined_reports(frame, grid, cfg, options, lattice, harnack, holder, sources))

    return reports
