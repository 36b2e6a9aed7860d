import itertools
import logging
from typing import Optional, Sequence

import numpy as np

from src.discretize.grid import Grid
from src.discretize.operators import ScalarField, lp_norm
from src.geometry.frames import VectorFieldFrame
from src.solvers.eigensolve import EigenResult, SolverConfig, solve, solve_p
from src.utils.errors import ParameterError, PreconditionError, SolverNonConvergenceError
from src.verify.base_check import BaseCheck, CheckReport

logger = logging.getLogger(__name__)

SIMPLICITY_DISTANCE = 1e-3
SIMPLICITY_SPREAD = 1e-6
MONOTONICITY_TOL = 1e-10


class PositivityCheck(BaseCheck):
    name = "positivity"
    direction = "gt"

    def run(self, res: EigenResult) -> CheckReport:
        values = res.u1.values
        return self._create_report(
            statistic=float(values.min()),
            threshold=0.0,
            details=f"nodes={values.size} nonpositive={int((values <= 0).sum())}"
        )


class SimplicityCheck(BaseCheck):
    name = "simplicity"
    direction = "lt"

    def run(
        self,
        frame: VectorFieldFrame,
        grid: Grid,
        cfg: SolverConfig,
        k: int,
        seeds: Optional[Sequence[int]] = None
    ) -> CheckReport:
        """
        Independent random positive starts converge to one normalized eigenfunction

        Args:
            frame: Vector-field frame
            grid: Grid
            cfg: Solver configuration (p, tolerances)
            k: Number of runs, >= 2
            seeds: Seeds per run; defaults to cfg.seed, cfg.seed + 1, ...

        Returns:
            CheckReport with statistic = max pairwise L^p distance; inconclusive
            when any run fails to converge
        """
        if k < 2:
            raise ParameterError(f"simplicity check needs k >= 2 runs, got {k}")
        seeds = list(seeds) if seeds is not None else [cfg.seed + j for j in range(k)]
        if len(seeds) != k:
            raise ParameterError(f"{len(seeds)} seeds for {k} runs")

        results = []
        for seed in seeds:
            run_cfg = cfg.model_copy(update={"seed": seed, "init": "random", "n_inits": 1})
            try:
                results.append(solve_p(frame, grid, run_cfg))
            except SolverNonConvergenceError as e:
                return self._inconclusive(f"run with seed {seed} did not converge: {e}")

        distance = max(
            lp_norm(ScalarField(grid, a.u1.values - b.u1.values), cfg.p)
            for a, b in itertools.combinations(results, 2)
        )
        lambdas = np.array([r.lambda1 for r in results])
        spread = float((lambdas.max() - lambdas.min()) / lambdas.min())

        return self._create_report(
            statistic=distance,
            threshold=SIMPLICITY_DISTANCE,
            details=f"runs={k} lambda_spread={spread:.3e}",
            passed=bool(distance < SIMPLICITY_DISTANCE and spread < SIMPLICITY_SPREAD)
        )


class SignChangeCheck(BaseCheck):
    """statistic = min(u) max(u); the field changes sign iff it is negative"""

    name = "sign_change"
    direction = "lt"

    def run(self, u: ScalarField, expect_change: bool = False) -> CheckReport:
        if not np.any(u.values):
            raise PreconditionError("sign change check needs a nonzero field")
        statistic = float(u.values.min() * u.values.max())
        changes = statistic < 0
        return self._create_report(
            statistic=statistic,
            threshold=0.0,
            details="changes sign" if changes else "no sign change",
            passed=changes == expect_change
        )


class GapCheck(BaseCheck):
    name = "gap"
    direction = "gt"

    def run(self, first: EigenResult, second: EigenResult) -> CheckReport:
        return self._create_report(
            statistic=second.lambda1 - first.lambda1,
            threshold=0.0,
            details=f"lambda1={first.lambda1:.12g} lambda2={second.lambda1:.12g}"
        )


class MonotonicityCheck(BaseCheck):
    name = "monotonicity"
    direction = "ge"

    def run(self, frame: VectorFieldFrame, cfg: SolverConfig, inner: Grid, outer: Grid) -> CheckReport:
        """
        lambda1 does not increase when Omega grows

        Args:
            frame: Vector-field frame
            cfg: Solver configuration
            inner: Grid of the smaller domain
            outer: Grid on the same lattice with a containing mask

        Returns:
            CheckReport with statistic lambda1(inner) / lambda1(outer)
        """
        if inner.resolution != outer.resolution or not np.allclose(inner.bounds, outer.bounds):
            raise PreconditionError("monotonicity check needs both masks on the same lattice")
        if np.any(inner.interior_mask & ~outer.interior_mask):
            raise PreconditionError("inner mask is not contained in the outer mask")

        lam_inner = solve(frame, inner, cfg).lambda1
        lam_outer = solve(frame, outer, cfg).lambda1
        return self._create_report(
            statistic=lam_inner / lam_outer,
            threshold=1.0 - MONOTONICITY_TOL,
            details=f"lambda1 inner={lam_inner:.12g} outer={lam_outer:.12g}"
        )


def positivity_check(res: EigenResult) -> CheckReport:
    return PositivityCheck().run(res)


def simplicity_check(
    frame: VectorFieldFrame,
    grid: Grid,
    cfg: SolverConfig,
    k: int,
    seeds: Optional[Sequence[int]] = None
) -> CheckReport:
    return SimplicityCheck().run(frame, grid, cfg, k, seeds)


def sign_change_check(u: ScalarField, expect_change: bool = False, name: Optional[str] = None) -> CheckReport:
    return SignChangeCheck(name).run(u, expect_change)


def gap_check(first: EigenResult, second: EigenResult) -> CheckReport:
    return GapCheck().run(first, second)


def monotonicity_check(frame: VectorFieldFrame, cfg: SolverConfig, inner: Grid, outer: Grid) -> CheckReport:
    return MonotonicityCheck().run(frame, cfg, inner, outer)
