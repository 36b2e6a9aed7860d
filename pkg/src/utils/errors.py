from typing import List, Optional


class SubellipticError(Exception):
    """Base exception for all library errors"""
    pass


class ParameterError(SubellipticError, ValueError):
    """Numerical parameter outside its admissible range"""
    pass


class PreconditionError(SubellipticError):
    """Operation called on inputs violating its precondition"""
    pass


class StructuralError(SubellipticError):
    """Malformed geometry: empty or disconnected domain, too few fields"""
    pass


class ConfigError(SubellipticError):
    """Invalid run configuration"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = ""
        if key:
            where = f" [key '{key}'"
            where += f", line {line}]" if line else "]"
        super().__init__(f"{message}{where}")


class SolverNonConvergenceError(SubellipticError):
    """Iterative solver stopped before its stopping test fired"""

    def __init__(
        self,
        message: str,
        trajectory: Optional[List[float]] = None,
        last_residual: Optional[float] = None
    ):
        self.trajectory = list(trajectory or [])
        self.last_residual = last_residual
        super().__init__(message)


class DivergenceError(SolverNonConvergenceError):
    """Energy became non-finite"""
    pass
