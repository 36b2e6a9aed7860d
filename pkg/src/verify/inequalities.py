import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from src.discretize.grid import Grid
from src.discretize.operators import (
    ScalarField,
    horizontal_gradient,
    lp_norm,
    p_energy,
)
from src.geometry.frames import VectorFieldFrame
from src.solvers.eigensolve import EigenResult
from src.utils.errors import ParameterError
from src.verify.base_check import BaseCheck, CheckReport
from src.verify.fields import random_admissible_fields

logger = logging.getLogger(__name__)

# every ZERO_FAMILY_STRIDE-th convexity sample has omega_1 = 0
ZERO_FAMILY_STRIDE = 10
POINCARE_SLACK = 1e-10
SHARPNESS_TOL = 1e-8
LATTICE_FLOOR = 1e-14


def _convexity_pairs(rng: np.random.Generator, n_samples: int, m_dim: int) -> Tuple[np.ndarray, np.ndarray]:
    w1 = rng.standard_normal((n_samples, m_dim))
    direction = rng.standard_normal((n_samples, m_dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    scale = np.linalg.norm(w1, axis=1) * 10.0 ** rng.uniform(-1.0, 1.0, n_samples)

    zero = np.arange(n_samples) % ZERO_FAMILY_STRIDE == 0
    w1[zero] = 0.0
    scale[zero] = 10.0 ** rng.uniform(-1.0, 1.0, zero.sum())
    return w1, w1 + direction * scale[:, None]


def convexity_constants(w1: np.ndarray, w2: np.ndarray, p: float) -> Tuple[np.ndarray, int]:
    """
    Largest admissible C per pair in the p-convexity inequality

    p >= 2:  |w2|^p >= |w1|^p + p|w1|^(p-2) w1.(w2-w1) + C |w2-w1|^p
    p < 2:   same with C |w2-w1|^2 / (|w1| + |w2|)^(2-p)

    Returns:
        (constants for pairs with w1 != w2, number of skipped pairs)
    """
    d = w2 - w1
    dn = np.linalg.norm(d, axis=1)
    keep = dn > 0
    w1, w2, d, dn = w1[keep], w2[keep], d[keep], dn[keep]

    n1 = np.linalg.norm(w1, axis=1)
    n2 = np.linalg.norm(w2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        # |w1|^(p-2) w1 is 0 at w1 = 0
        factor = np.where(n1 > 0, n1 ** (p - 2), 0.0)
    slack = n2 ** p - n1 ** p - p * factor * np.sum(w1 * d, axis=1)

    if p >= 2:
        constants = slack / dn ** p
    else:
        constants = slack * (n1 + n2) ** (2 - p) / dn ** 2
    return constants, int((~keep).sum())


class ConvexityCheck(BaseCheck):
    name = "convexity"
    direction = "gt"

    def run(self, p: float, n_samples: int, seed: int, m_dim: int) -> CheckReport:
        """
        Empirical infimum of the convexity constant with fresh-sample revalidation

        Args:
            p: Exponent > 1
            n_samples: Pairs per sample set
            seed: Seed of the first set; the revalidation set uses seed + 1
            m_dim: Dimension of the vectors
        """
        if p <= 1:
            raise ParameterError(f"p must be > 1, got {p}")
        if n_samples < 1 or m_dim < 1:
            raise ParameterError("n_samples and m_dim must be >= 1")

        constants, skipped = convexity_constants(*_convexity_pairs(np.random.default_rng(seed), n_samples, m_dim), p)
        c_hat = float(constants.min()) if constants.size else float("nan")

        fresh, _ = convexity_constants(*_convexity_pairs(np.random.default_rng(seed + 1), n_samples, m_dim), p)
        fresh_ok = bool(c_hat > 0 and np.all(fresh >= c_hat / 2))

        return self._create_report(
            statistic=c_hat,
            threshold=0.0,
            details=f"p={p:g} m={m_dim} samples={n_samples} skipped={skipped} fresh_min={fresh.min():.6g}",
            passed=bool(c_hat > 0 and fresh_ok)
        )


class PoincareCheck(BaseCheck):
    name = "poincare"
    direction = "le"

    def run(self, frame: VectorFieldFrame, grid: Grid, res: EigenResult, n_fields: int, seed: int) -> CheckReport:
        """
        ||u||_p^p <= E(u) / lambda1 on random admissible fields, equality at u1

        The statistic is the largest lambda1 ||u||_p^p / E(u) over the fields.
        """
        p = res.p
        worst = 0.0
        for w in random_admissible_fields(grid, n_fields, seed):
            energy = p_energy(horizontal_gradient(frame, grid, w), p)
            worst = max(worst, res.lambda1 * lp_norm(w, p) ** p / energy)

        energy_u1 = p_energy(horizontal_gradient(frame, grid, res.u1), p)
        sharpness = abs(res.lambda1 * lp_norm(res.u1, p) ** p - energy_u1) / energy_u1

        threshold = 1.0 + POINCARE_SLACK
        return self._create_report(
            statistic=worst,
            threshold=threshold,
            details=f"fields={n_fields} sharpness={sharpness:.3e}",
            passed=bool(worst <= threshold and sharpness <= SHARPNESS_TOL)
        )


class LatticeCheck(BaseCheck):
    name = "lattice"
    direction = "lt"

    def run(
        self,
        frame: VectorFieldFrame,
        grid: Grid,
        samples: Sequence[ScalarField],
        p: float = 2.0,
        reference: Optional[CheckReport] = None
    ) -> CheckReport:
        """
        Discrepancy between E(|u|) and E(u)

        Args:
            frame: Vector-field frame
            grid: Grid of the samples
            samples: Sign-changing fields
            p: Exponent of the energy
            reference: Report of the same samples on the coarser grid; the
                check passes iff the discrepancy decreases relative to it

        Returns:
            CheckReport; without a reference it passes iff the statistic is finite
        """
        if not samples:
            raise ParameterError("lattice check needs at least one sample")

        worst = 0.0
        worst_split = 0.0
        for u in samples:
            energy = p_energy(horizontal_gradient(frame, grid, u), p)
            abs_energy = p_energy(horizontal_gradient(frame, grid, abs(u)), p)
            pos = ScalarField(grid, np.maximum(u.values, 0.0))
            neg = ScalarField(grid, np.maximum(-u.values, 0.0))
            split = (
                p_energy(horizontal_gradient(frame, grid, pos), p)
                + p_energy(horizontal_gradient(frame, grid, neg), p)
            )
            worst = max(worst, abs(abs_energy - energy) / energy)
            worst_split = max(worst_split, abs(split - energy) / energy)

        details = f"samples={len(samples)} resolution={grid.resolution} split={worst_split:.6g}"
        if reference is None:
            return self._create_report(statistic=worst, threshold=np.inf, details=details)

        passed = worst < reference.statistic or max(worst, reference.statistic) <= LATTICE_FLOOR
        return self._create_report(
            statistic=worst,
            threshold=reference.statistic,
            details=details,
            passed=bool(passed)
        )


def convexity_check(p: float, n_samples: int, seed: int, m_dim: int) -> CheckReport:
    return ConvexityCheck().run(p, n_samples, seed, m_dim)


def poincare_check(frame: VectorFieldFrame, grid: Grid, res: EigenResult, n_fields: int, seed: int) -> CheckReport:
    return PoincareCheck().run(frame, grid, res, n_fields, seed)


def lattice_check(
    frame: VectorFieldFrame,
    grid: Grid,
    samples: Sequence[ScalarField],
    p: float = 2.0,
    reference: Optional[CheckReport] = None,
    name: str = "lattice"
) -> CheckReport:
    return LatticeCheck(name).run(frame, grid, samples, p, reference)
