from .eigensolve import (
    SolverConfig,
    EigenResult,
    solve,
    solve_p,
    solve_p2,
    second_mode_p2,
    residual,
    p_star,
    lower_bound_constant
)

__all__ = [
    "SolverConfig",
    "EigenResult",
    "solve",
    "solve_p",
    "solve_p2",
    "second_mode_p2",
    "residual",
    "p_star",
    "lower_bound_constant"
]
