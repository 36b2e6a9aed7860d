import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from src.config.run_config import RunConfig, irrelevant_options
from src.discretize.grid import Grid, build_grid
from src.discretize.operators import natural_norm
from src.geometry.frames import (
    SpanningSet,
    VectorFieldFrame,
    build_spanning_set,
    local_Q,
    pointwise_Q_field,
    resolve_frame,
)
from src.geometry.metric import build_reachability_graph, control_distance_field
from src.solvers.eigensolve import EigenResult, SolverConfig, lower_bound_constant, p_star, solve
from src.utils.errors import ParameterError, SolverNonConvergenceError, SubellipticError
from src.utils.tables import OutputError, write_field, write_rows
from src.verify.suite import center_node, exit_code, run_suite

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_NONCONVERGENCE = 3
EXIT_USAGE = 4

RESULT_COLUMNS = [
    "p", "lambda1", "poincare_constant", "residual", "iterations", "resolution",
    "frame", "volume", "Q", "p_star", "lower_bound_constant", "natural_norm"
]


class CommandRunner:
    """
    Executes one command against a validated RunConfig

    Every command writes its artifacts into the output directory and
    returns an exit code:
    - 0 pass, 1 failed check, 2 inconclusive check
    - 3 solver non-convergence (partial diagnostics are still written)
    - 4 usage, precondition, configuration or I/O error
    """

    def __init__(self, cfg: RunConfig, output_dir: Optional[str] = None):
        self.cfg = cfg
        self.output = Path(output_dir or cfg.output.directory)
        self.config_hash = cfg.digest()
        self._frame: Optional[VectorFieldFrame] = None
        self._grid: Optional[Grid] = None
        self._ss: Optional[SpanningSet] = None
        self._Q: Optional[float] = None

        self.handlers: Dict[str, Callable[[], int]] = {
            "solve": self.solve,
            "sweep": self.sweep,
            "distance": self.distance,
            "dimension": self.dimension,
            "verify": self.verify
        }
        logger.info(f"Runner initialized (output {self.output}, config {self.config_hash})")

    @property
    def frame(self) -> VectorFieldFrame:
        if self._frame is None:
            self._frame = resolve_frame(self.cfg.frame.name, self.cfg.domain.dim)
        return self._frame

    @property
    def grid(self) -> Grid:
        if self._grid is None:
            self._grid = build_grid(self.cfg.domain, self.cfg.grid.resolution)
        return self._grid

    def run(self, command: str) -> int:
        """Dispatch a command and map errors to exit codes"""
        handler = self.handlers.get(command)
        if handler is None:
            logger.error(f"Unknown command '{command}', expected one of {sorted(self.handlers)}")
            return EXIT_USAGE

        for name in irrelevant_options(self.cfg, command):
            logger.warning(f"Option '{name}' is ignored by '{command}'")

        try:
            self._write_effective_config()
            return handler()
        except SolverNonConvergenceError as e:
            logger.error(f"{command}: {e}")
            try:
                self._write_trajectory(e)
            except OutputError as write_error:
                logger.error(f"Trajectory not written: {write_error}")
            return EXIT_NONCONVERGENCE
        except SubellipticError as e:
            logger.error(f"{command}: {e}")
            return EXIT_USAGE

    # artifacts

    def _write_effective_config(self):
        effective = json.dumps(self.cfg.effective(), indent=2, sort_keys=True)
        logger.info(f"Effective configuration:\n{effective}")
        try:
            self.output.mkdir(parents=True, exist_ok=True)
            (self.output / "effective_config.json").write_text(effective + "\n")
        except OSError as e:
            raise OutputError(f"cannot write to {self.output}: {e}") from e

    def _write_trajectory(self, error: SolverNonConvergenceError):
        rows = [{"iteration": k, "rayleigh": value} for k, value in enumerate(error.trajectory)]
        write_rows(rows, self.output / "trajectory.csv", self.config_hash, columns=["iteration", "rayleigh"])
        if error.last_residual is not None:
            logger.error(f"Last residual {error.last_residual:.6e} after {len(rows)} Rayleigh values")

    def _spanning_set(self) -> SpanningSet:
        if self._ss is None:
            self._ss = build_spanning_set(self.frame, self.grid.sample_points(), s_max=self.cfg.options.s_max)
        return self._ss

    def _homogeneous_dimension(self) -> float:
        """Q over interior nodes and cell midpoints, NaN when the frame is not certified"""
        if self._Q is None:
            try:
                self._Q = float(local_Q(self._spanning_set(), self.grid.sample_points()))
            except SubellipticError as e:
                logger.warning(f"Homogeneous dimension unavailable: {e}")
                self._Q = float("nan")
        return self._Q

    def _result_row(self, res: EigenResult) -> dict:
        Q = self._homogeneous_dimension()
        if np.isfinite(Q):
            exponent = p_star(res.p, int(Q))
            constant = lower_bound_constant(res.lambda1, self.grid.volume, res.p, int(Q))
        else:
            exponent = constant = float("nan")

        return {
            "p": res.p,
            "lambda1": res.lambda1,
            "poincare_constant": res.poincare_constant,
            "residual": res.residual,
            "iterations": res.iterations,
            "resolution": "x".join(str(r) for r in self.grid.resolution),
            "frame": self.frame.label,
            "volume": self.grid.volume,
            "Q": Q,
            "p_star": exponent,
            "lower_bound_constant": constant,
            "natural_norm": natural_norm(self.frame, self.grid, res.u1, res.p)
        }

    # commands

    def solve(self) -> int:
        res = solve(self.frame, self.grid, self.cfg.solver)
        write_rows([self._result_row(res)], self.output / "results.csv", self.config_hash, RESULT_COLUMNS)
        write_field(self.grid.interior_points(), res.u1.values, self.output / "u1.csv", self.config_hash)
        return EXIT_PASS

    def sweep(self) -> int:
        p_values = self.cfg.options.p_values
        if not p_values:
            raise ParameterError("sweep needs options.p_values")

        rows: List[dict] = []
        try:
            for p in p_values:
                solver: SolverConfig = self.cfg.solver.model_copy(update={"p": p})
                rows.append(self._result_row(solve(self.frame, self.grid, solver)))
        finally:
            write_rows(rows, self.output / "sweep.csv", self.config_hash, RESULT_COLUMNS)
        return EXIT_PASS

    def distance(self) -> int:
        opts = self.cfg.options
        source = self.grid.locate(opts.source) if opts.source is not None else center_node(self.grid)
        graph = build_reachability_graph(self.frame, self.grid, opts.stencil_radius)
        df = control_distance_field(graph, source)
        unreachable = int(np.isinf(df.values).sum())
        if unreachable:
            logger.warning(f"{unreachable} nodes are unreachable from node {source}")
        write_field(self.grid.interior_points(), df.values, self.output / "distance.csv", self.config_hash)
        return EXIT_PASS

    def dimension(self) -> int:
        ss = self._spanning_set()
        Q = local_Q(ss, self.grid.sample_points())
        points = self.grid.interior_points()
        q_field = pointwise_Q_field(ss, points)
        print(f"Q = {Q}")
        logger.info(f"Homogeneous dimension of '{self.frame.label}' on {self.grid.resolution}: Q = {Q} (step {ss.step})")
        write_field(points, q_field, self.output / "dimension.csv", self.config_hash)
        return EXIT_PASS

    def verify(self) -> int:
        reports = run_suite(self.frame, self.grid, self.cfg.solver, self.cfg.options)
        write_rows(
            [r.row() for r in reports],
            self.output / "checks.csv",
            self.config_hash,
            columns=["name", "verdict", "passed", "statistic", "threshold", "details"]
        )
        code = exit_code(reports)
        logger.info(f"{sum(r.passed for r in reports)}/{len(reports)} checks passed (exit {code})")
        return code


def run_command(command: str, cfg: RunConfig, output_dir: Optional[str] = None) -> int:
    """Run one command and return its exit code"""
    return CommandRunner(cfg, output_dir).run(command)
