from .errors import (
    SubellipticError,
    ParameterError,
    PreconditionError,
    StructuralError,
    ConfigError,
    SolverNonConvergenceError,
    DivergenceError
)

__all__ = [
    "SubellipticError",
    "ParameterError",
    "PreconditionError",
    "StructuralError",
    "ConfigError",
    "SolverNonConvergenceError",
    "DivergenceError"
]
