import logging
from typing import Sequence

import numpy as np

from src.discretize.grid import Grid
from src.discretize.operators import ScalarField
from src.geometry.metric import DistanceField, metric_ball
from src.utils.errors import ParameterError, PreconditionError
from src.verify.base_check import BaseCheck, CheckReport

logger = logging.getLogger(__name__)

REFINEMENT_FACTOR = 1.5


def _touches_exterior(grid: Grid, nodes: np.ndarray) -> bool:
    """True if any node has an axis neighbor outside Omega"""
    if nodes.size == 0:
        return False
    multi = np.stack(np.unravel_index(grid.interior_index[nodes], grid.resolution), axis=1)
    for axis in range(grid.n):
        for step in (-1, 1):
            shifted = multi.copy()
            shifted[:, axis] += step
            # box boundary nodes are exterior, so shifted stays inside the box
            flat = np.ravel_multi_index(tuple(shifted.T), grid.resolution)
            if not grid.interior_mask.ravel()[flat].all():
                return True
    return False


class HarnackCheck(BaseCheck):
    name = "harnack"
    direction = "lt"

    def run(self, u1: ScalarField, df: DistanceField, r: float) -> CheckReport:
        """
        Harnack quotient max/min of u1 over the metric ball of radius r

        Raises:
            PreconditionError: the ball of radius 3r reaches the boundary of Omega
        """
        if df.grid is not u1.grid:
            raise ParameterError("distance field and u1 live on different grids")
        if _touches_exterior(u1.grid, metric_ball(df, 3 * r)):
            raise PreconditionError(f"metric ball of radius {3 * r:g} around node {df.source} leaves Omega")

        values = u1.values[metric_ball(df, r)]
        low = values.min()
        quotient = float(values.max() / low) if low > 0 else np.inf
        return self._create_report(
            statistic=quotient,
            threshold=np.inf,
            details=f"r={r:g} ball_nodes={values.size}"
        )


class HolderCheck(BaseCheck):
    name = "holder"
    direction = "lt"

    def run(self, u: ScalarField, dfs: Sequence[DistanceField], alpha: float) -> CheckReport:
        """
        Largest |u(x) - u(y)| / d_X(x, y)^alpha over sources x and reachable y

        Unreachable pairs are skipped and counted.
        """
        if not 0 < alpha <= 1:
            raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
        if not dfs:
            raise ParameterError("Holder check needs at least one distance field")

        worst = 0.0
        skipped = 0
        for df in dfs:
            d = df.values
            others = np.arange(d.size) != df.source
            reachable = others & np.isfinite(d) & (d > 0)
            skipped += int((others & ~np.isfinite(d)).sum())
            if reachable.any():
                ratios = np.abs(u.values[reachable] - u.values[df.source]) / d[reachable] ** alpha
                worst = max(worst, float(ratios.max()))

        return self._create_report(
            statistic=worst,
            threshold=np.inf,
            details=f"alpha={alpha:g} sources={len(dfs)} skipped_pairs={skipped}"
        )


class RefinementCheck(BaseCheck):
    direction = "le"

    def run(self, statistics: Sequence[float], factor: float = REFINEMENT_FACTOR) -> CheckReport:
        """Largest ratio between successive refinements must stay <= factor"""
        stats = np.asarray(statistics, dtype=float)
        if stats.size < 2:
            raise ParameterError("refinement check needs statistics from at least two grids")
        if not np.all(np.isfinite(stats)):
            return self._create_report(statistic=np.inf, threshold=factor, details="non-finite statistic")

        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(stats[:-1] > 0, stats[1:] / stats[:-1], np.where(stats[1:] > 0, np.inf, 1.0))
        return self._create_report(
            statistic=float(ratios.max()),
            threshold=factor,
            details="statistics=" + ",".join(f"{s:.6g}" for s in stats)
        )


def harnack_check(u1: ScalarField, df: DistanceField, r: float) -> CheckReport:
    return HarnackCheck().run(u1, df, r)


def holder_check(u: ScalarField, dfs: Sequence[DistanceField], alpha: float) -> CheckReport:
    return HolderCheck().run(u, dfs, alpha)


def refinement_stable(statistics: Sequence[float], factor: float = REFINEMENT_FACTOR, name: str = "refinement") -> CheckReport:
    return RefinementCheck(name).run(statistics, factor)
