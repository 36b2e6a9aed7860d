import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.config.settings import settings
from src.utils.errors import (
    ParameterError,
    PreconditionError,
    StructuralError,
    SubellipticError
)

logger = logging.getLogger(__name__)

# expected ambient dimension per built-in frame (None: any)
BUILTIN_FRAMES = {
    "euclidean": None,
    "grushin": 2,
    "heisenberg": 3
}


class FrameError(SubellipticError):
    """Base exception for frame errors"""
    pass


class FrameEvaluationError(FrameError):
    """Coefficient evaluated to a non-finite value"""
    pass


class FrameMismatchError(FrameError):
    """Derived fields belong to different frames"""
    pass


class SpanNotCertifiedError(FrameError):
    """Brackets up to s_max do not span at some sample"""

    def __init__(self, message: str, worst_sample: np.ndarray, rank: int):
        self.worst_sample = worst_sample
        self.rank = rank
        super().__init__(message)


class SpanFailureError(FrameError):
    """No NSW coefficient is nonzero at a point"""

    def __init__(self, message: str, point: np.ndarray):
        self.point = point
        super().__init__(message)


def _compile(exprs: Sequence[sp.Expr], symbols: Tuple[sp.Symbol, ...]) -> List[Callable]:
    # one callable per entry so that constant entries broadcast
    return [sp.lambdify(symbols, e, "numpy") for e in exprs]


def _evaluate_entries(funcs: List[Callable], points: np.ndarray) -> np.ndarray:
    count = points.shape[0]
    columns = [points[:, j] for j in range(points.shape[1])]
    out = np.empty((count, len(funcs)))
    for idx, func in enumerate(funcs):
        out[:, idx] = np.broadcast_to(np.asarray(func(*columns), dtype=float), (count,))
    return out


def _as_points(points, n: int) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    if arr.shape[1] != n:
        raise ParameterError(f"expected points in R^{n}, got shape {arr.shape}")
    return arr


def _word_name(word: Tuple[int, ...]) -> str:
    if len(word) == 1:
        return f"X{word[0] + 1}"
    return f"[X{word[0] + 1},{_word_name(word[1:])}]"


@dataclass(frozen=True)
class DerivedField:
    """
    A vector field Y = sum_k c_k(x) d/dx_k obtained from a frame by brackets

    The bracket word J records the right-nested generators; its length is the
    formal degree d(Y).
    """

    frame_label: str
    symbols: Tuple[sp.Symbol, ...]
    components: Tuple[sp.Expr, ...]
    word: Tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.symbols)

    @property
    def degree(self) -> int:
        return len(self.word)

    @property
    def name(self) -> str:
        return _word_name(self.word)

    @property
    def is_zero(self) -> bool:
        return all(sp.expand(c) == 0 for c in self.components)

    @cached_property
    def jacobian_exprs(self) -> sp.ImmutableMatrix:
        """[dc_k/dx_j] as exact polynomials"""
        return sp.ImmutableMatrix(self.n, self.n, lambda k, j: sp.diff(self.components[k], self.symbols[j]))

    @cached_property
    def _vector_funcs(self) -> List[Callable]:
        return _compile(self.components, self.symbols)

    @cached_property
    def _jacobian_funcs(self) -> List[Callable]:
        return _compile(list(self.jacobian_exprs), self.symbols)

    def vector_at(self, points) -> np.ndarray:
        pts = _as_points(points, self.n)
        return _evaluate_entries(self._vector_funcs, pts)

    def jacobian_at(self, points) -> np.ndarray:
        pts = _as_points(points, self.n)
        return _evaluate_entries(self._jacobian_funcs, pts).reshape(-1, self.n, self.n)

    def vector(self, x) -> np.ndarray:
        return self.vector_at(x)[0]

    def jacobian(self, x) -> np.ndarray:
        return self.jacobian_at(x)[0]


@dataclass(frozen=True)
class VectorFieldFrame:
    """
    Hörmander frame X_i = sum_k b_ik(x) d/dx_k with polynomial coefficients

    Coefficients are held symbolically; numerical evaluation and the exact
    Jacobian [db_ik/dx_j] are compiled on first use.
    """

    label: str
    symbols: Tuple[sp.Symbol, ...]
    coefficients: sp.ImmutableMatrix

    def __post_init__(self):
        m, n = self.coefficients.shape
        if n != len(self.symbols):
            raise StructuralError(f"frame '{self.label}': {n} columns for {len(self.symbols)} coordinates")
        if m > n:
            raise StructuralError(f"frame '{self.label}': m={m} fields exceed dimension n={n}")

    @property
    def n(self) -> int:
        return self.coefficients.shape[1]

    @property
    def m(self) -> int:
        return self.coefficients.shape[0]

    @cached_property
    def _coeff_funcs(self) -> List[Callable]:
        return _compile(list(self.coefficients), self.symbols)

    @cached_property
    def _jacobian_funcs(self) -> List[Callable]:
        exprs = [
            sp.diff(self.coefficients[i, k], self.symbols[j])
            for i in range(self.m)
            for k in range(self.n)
            for j in range(self.n)
        ]
        return _compile(exprs, self.symbols)

    def coeff_at(self, points) -> np.ndarray:
        """Coefficient matrices at many points, shape (N, m, n)"""
        pts = _as_points(points, self.n)
        return _evaluate_entries(self._coeff_funcs, pts).reshape(-1, self.m, self.n)

    def jacobian_at(self, points) -> np.ndarray:
        """Jacobians [db_ik/dx_j] at many points, shape (N, m, n, n)"""
        pts = _as_points(points, self.n)
        return _evaluate_entries(self._jacobian_funcs, pts).reshape(-1, self.m, self.n, self.n)

    def field(self, i: int) -> DerivedField:
        return DerivedField(
            frame_label=self.label,
            symbols=self.symbols,
            components=tuple(self.coefficients.row(i)),
            word=(i,)
        )

    def fields(self) -> List[DerivedField]:
        return [self.field(i) for i in range(self.m)]


def evaluate_frame(frame: VectorFieldFrame, x) -> np.ndarray:
    """
    Evaluate the coefficient matrix at a point

    Args:
        frame: Vector-field frame
        x: Point in R^n

    Returns:
        m x n matrix whose row i is X_iI(x)
    """
    point = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(point)):
        raise ParameterError(f"non-finite point {point}")

    values = frame.coeff_at(point)[0]
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        i, k = bad[0]
        raise FrameEvaluationError(
            f"frame '{frame.label}': coefficient b_{i + 1}{k + 1} is non-finite at x={point.tolist()}"
        )
    return values


def coeff_jacobian(frame: VectorFieldFrame, x) -> np.ndarray:
    """Exact m x n x n Jacobian [db_ik/dx_j] at x"""
    return frame.jacobian_at(np.asarray(x, dtype=float).reshape(-1))[0]


def bracket_field(Y: DerivedField, Z: DerivedField) -> DerivedField:
    """
    Symbolic Lie bracket [Y, Z] with coefficients J_Z Y - J_Y Z

    Raises:
        FrameMismatchError: fields from different frames
    """
    if Y.frame_label != Z.frame_label or Y.symbols != Z.symbols:
        raise FrameMismatchError(
            f"cannot bracket fields of frames '{Y.frame_label}' and '{Z.frame_label}'"
        )

    y = sp.Matrix(Y.components)
    z = sp.Matrix(Z.components)
    coeffs = Z.jacobian_exprs * y - Y.jacobian_exprs * z
    return DerivedField(
        frame_label=Y.frame_label,
        symbols=Y.symbols,
        components=tuple(sp.expand(c) for c in coeffs),
        word=Y.word + Z.word
    )


def lie_bracket(Y: DerivedField, Z: DerivedField, x) -> Tuple[np.ndarray, DerivedField]:
    """
    Bracket [Y, Z] evaluated at x

    Returns:
        (coefficient vector at x, the bracket as a composable DerivedField)
    """
    bracket = bracket_field(Y, Z)
    return bracket.vector(x), bracket


@dataclass(frozen=True, eq=False)
class SpanningSet:
    """Selected commutators Y_1..Y_l spanning R^n at every sample"""

    frame: VectorFieldFrame
    vectors: Tuple[DerivedField, ...]
    step: int
    sample_points: np.ndarray

    @property
    def degrees(self) -> List[int]:
        return [v.degree for v in self.vectors]

    def vectors_at(self, points) -> np.ndarray:
        """Stacked Y_iI at many points, shape (N, l, n)"""
        return np.stack([v.vector_at(points) for v in self.vectors], axis=1)


def _ranks(stack: np.ndarray, tol: float) -> np.ndarray:
    if stack.shape[1] == 0:
        return np.zeros(stack.shape[0], dtype=int)
    singular = np.linalg.svd(stack, compute_uv=False)
    return (singular > tol).sum(axis=1)


def build_spanning_set(
    frame: VectorFieldFrame,
    samples,
    s_max: Optional[int] = None,
    span_tol: Optional[float] = None
) -> SpanningSet:
    """
    Greedy selection of commutators certifying the Hörmander condition

    Bracket length k grows from 1; within a length, candidates are visited in
    lexicographic word order and kept when they raise the rank at any sample.
    The generators X_1..X_m are always kept.

    Args:
        frame: Vector-field frame
        samples: Points (N, n) where the span is tested
        s_max: Largest bracket length tried
        span_tol: Singular-value threshold for rank

    Returns:
        SpanningSet with the smallest step s achieving full rank everywhere
    """
    s_max = settings.S_MAX if s_max is None else s_max
    span_tol = settings.SPAN_TOL if span_tol is None else span_tol
    points = _as_points(samples, frame.n)

    if points.shape[0] == 0:
        raise PreconditionError("span test needs at least one sample point")
    if s_max < 1:
        raise ParameterError(f"s_max must be >= 1, got {s_max}")

    selected: List[DerivedField] = []
    stack = np.zeros((points.shape[0], 0, frame.n))
    ranks = _ranks(stack, span_tol)
    level = frame.fields()

    for k in range(1, s_max + 1):
        if k > 1:
            level = [bracket_field(frame.field(j), w) for j in range(frame.m) for w in level]
            level = sorted((f for f in level if not f.is_zero), key=lambda f: f.word)

        for candidate in level:
            trial = np.concatenate([stack, candidate.vector_at(points)[:, None, :]], axis=1)
            trial_ranks = _ranks(trial, span_tol)
            if k == 1 or np.any(trial_ranks > ranks):
                selected.append(candidate)
                stack, ranks = trial, trial_ranks

        if np.all(ranks == frame.n):
            logger.info(
                f"Frame '{frame.label}': Hörmander step s={k}, "
                f"spanning set {[v.name for v in selected]}"
            )
            return SpanningSet(frame=frame, vectors=tuple(selected), step=k, sample_points=points)

    worst = int(np.argmin(ranks))
    raise SpanNotCertifiedError(
        f"Hörmander condition not certified at step <= {s_max} for frame '{frame.label}': "
        f"rank {ranks[worst]} < {frame.n} at x={points[worst].tolist()}",
        worst_sample=points[worst],
        rank=int(ranks[worst])
    )


@dataclass(frozen=True)
class NSWTerm:
    exponent: int
    coefficient: float
    subset: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class NSWEvaluation:
    """Terms |a_I(x)| r^d(I) of the Nagel-Stein-Wainger polynomial at a point"""

    point: np.ndarray
    terms: Tuple[NSWTerm, ...]

    def value(self, r: float) -> float:
        """Lambda(x, r)"""
        return float(sum(t.coefficient * r ** t.exponent for t in self.terms))


def _subsets(ss: SpanningSet) -> List[Tuple[int, ...]]:
    n = ss.frame.n
    if len(ss.vectors) < n:
        raise StructuralError(f"spanning set has l={len(ss.vectors)} < n={n} vectors")
    return list(itertools.combinations(range(len(ss.vectors)), n))


def _nsw_table(ss: SpanningSet, points) -> Tuple[np.ndarray, np.ndarray, List[Tuple[int, ...]]]:
    subsets = _subsets(ss)
    stacked = ss.vectors_at(points)
    degrees = np.array(ss.degrees)
    exponents = np.array([degrees[list(s)].sum() for s in subsets])
    # permutations of I only flip the sign, so |det| over unordered subsets suffices
    coefficients = np.stack([np.abs(np.linalg.det(stacked[:, list(s), :])) for s in subsets], axis=1)
    return exponents, coefficients, subsets


def nsw_terms(ss: SpanningSet, x) -> NSWEvaluation:
    """
    Terms of Lambda(x, r) = sum_I |det(Y_i1..Y_in)(x)| r^(d(Y_i1)+...+d(Y_in))

    Args:
        ss: Spanning set
        x: Point

    Returns:
        NSWEvaluation with one term per unordered n-subset of {1..l}
    """
    point = np.asarray(x, dtype=float).reshape(-1)
    exponents, coefficients, subsets = _nsw_table(ss, point)
    terms = tuple(
        NSWTerm(exponent=int(e), coefficient=float(c), subset=s)
        for e, c, s in zip(exponents, coefficients[0], subsets)
    )
    return NSWEvaluation(point=point, terms=terms)


def pointwise_Q_field(ss: SpanningSet, points, zero_tol: Optional[float] = None) -> np.ndarray:
    """Q(x) at many points: the smallest exponent carrying a nonzero coefficient"""
    zero_tol = settings.ZERO_TOL if zero_tol is None else zero_tol
    pts = _as_points(points, ss.frame.n)
    exponents, coefficients, _ = _nsw_table(ss, pts)

    alive = coefficients > zero_tol
    dead = ~alive.any(axis=1)
    if dead.any():
        bad = pts[np.argmax(dead)]
        raise SpanFailureError(f"span failure at x={bad.tolist()}", point=bad)

    masked = np.where(alive, exponents[None, :], np.iinfo(np.int64).max)
    return masked.min(axis=1).astype(int)


def pointwise_Q(ss: SpanningSet, x, zero_tol: Optional[float] = None) -> int:
    """Pointwise homogeneous dimension Q(x) = lim_{r->0+} log Lambda(x, r) / log r"""
    return int(pointwise_Q_field(ss, np.asarray(x, dtype=float).reshape(1, -1), zero_tol)[0])


def local_Q(ss: SpanningSet, samples, zero_tol: Optional[float] = None) -> int:
    """Local homogeneous dimension Q = sup over samples of Q(x)"""
    return int(pointwise_Q_field(ss, samples, zero_tol).max())


def builtin_frame(name: str, n: Optional[int] = None) -> VectorFieldFrame:
    """
    Built-in frames

    Args:
        name: "euclidean", "grushin" or "heisenberg"
        n: Ambient dimension; required for euclidean, checked for the others
    """
    if name not in BUILTIN_FRAMES:
        raise ParameterError(f"unknown frame '{name}', expected one of {sorted(BUILTIN_FRAMES)}")

    expected = BUILTIN_FRAMES[name]
    if expected is None:
        if n is None or n < 1:
            raise ParameterError("euclidean frame needs a dimension n >= 1")
    elif n is not None and n != expected:
        raise ParameterError(f"frame '{name}' lives in R^{expected}, domain has dimension {n}")
    n = expected or n

    symbols = sp.symbols(f"x1:{n + 1}")
    if name == "euclidean":
        coefficients = sp.eye(n)
    elif name == "grushin":
        x, _ = symbols
        coefficients = sp.Matrix([[1, 0], [0, x]])
    else:
        x, y, _ = symbols
        half = sp.Rational(1, 2)
        coefficients = sp.Matrix([[1, 0, -half * y], [0, 1, half * x]])

    return VectorFieldFrame(label=name, symbols=tuple(symbols), coefficients=sp.ImmutableMatrix(coefficients))


class FrameFile(BaseModel):
    """Custom frame document: fields[i][k] lists (exponents, coefficient) pairs of b_ik"""

    model_config = ConfigDict(extra="forbid")

    label: str = "custom"
    n: int = Field(ge=1)
    fields: List[List[List[Tuple[List[int], float]]]]


def load_frame_file(path) -> VectorFieldFrame:
    """
    Load a polynomial frame from a JSON file

    Raises:
        StructuralError: malformed document or inconsistent shapes
    """
    path = Path(path)
    try:
        doc = FrameFile.model_validate_json(path.read_text())
    except ValidationError as e:
        raise StructuralError(f"invalid frame file {path}: {e}") from e

    symbols = sp.symbols(f"x1:{doc.n + 1}")
    rows = []
    for i, row in enumerate(doc.fields):
        if len(row) != doc.n:
            raise StructuralError(f"field X{i + 1} has {len(row)} coefficients, expected {doc.n}")
        entries = []
        for k, poly in enumerate(row):
            expr = sp.Integer(0)
            for exponents, coef in poly:
                if len(exponents) != doc.n or min(exponents, default=0) < 0:
                    raise StructuralError(f"b_{i + 1}{k + 1}: bad exponent tuple {exponents}")
                monomial = sp.Mul(*[s ** e for s, e in zip(symbols, exponents)])
                expr += sp.Rational(repr(float(coef))) * monomial
            entries.append(sp.expand(expr))
        rows.append(entries)

    logger.info(f"Loaded custom frame '{doc.label}' (m={len(rows)}, n={doc.n}) from {path}")
    return VectorFieldFrame(
        label=doc.label,
        symbols=tuple(symbols),
        coefficients=sp.ImmutableMatrix(rows)
    )


def resolve_frame(spec: str, n: int) -> VectorFieldFrame:
    """Built-in name or path to a custom frame file"""
    if spec in BUILTIN_FRAMES:
        return builtin_frame(spec, n)

    frame = load_frame_file(spec)
    if frame.n != n:
        raise ParameterError(f"frame '{frame.label}' lives in R^{frame.n}, domain has dimension {n}")
    return frame
