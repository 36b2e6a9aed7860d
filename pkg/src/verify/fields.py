from typing import List

import numpy as np

from src.discretize.grid import Grid
from src.discretize.operators import ScalarField
from src.utils.errors import ParameterError

MAX_FREQUENCY = 4
TERMS_PER_FIELD = 3


def _sine_product(grid: Grid, frequencies: np.ndarray) -> np.ndarray:
    pts = grid.interior_points()
    low = grid.bounds[:, 0]
    length = grid.bounds[:, 1] - grid.bounds[:, 0]
    return np.prod(np.sin(np.pi * frequencies * (pts - low) / length), axis=1)


def random_admissible_fields(grid: Grid, n_fields: int, seed: int) -> List[ScalarField]:
    """
    Masked trigonometric sums vanishing on the box boundary

    Each field is sum_j c_j prod_k sin(pi a_jk (x_k - low_k) / L_k) with
    integer frequencies a_jk in 1..4 and standard normal c_j.
    """
    if n_fields < 1:
        raise ParameterError(f"n_fields must be >= 1, got {n_fields}")

    rng = np.random.default_rng(seed)
    fields = []
    while len(fields) < n_fields:
        values = np.zeros(grid.n_interior)
        for _ in range(TERMS_PER_FIELD):
            frequencies = rng.integers(1, MAX_FREQUENCY + 1, size=grid.n)
            values += rng.standard_normal() * _sine_product(grid, frequencies)
        if np.any(values != 0):
            fields.append(ScalarField(grid, values))
    return fields


def sign_changing_samples(grid: Grid) -> List[ScalarField]:
    """Smooth fields with a nodal set inside the box"""
    first = np.array([2] + [1] * (grid.n - 1))
    samples = [ScalarField(grid, _sine_product(grid, first))]
    if grid.n > 1:
        second = np.array([1, 2] + [1] * (grid.n - 2))
        samples.append(ScalarField(grid, _sine_product(grid, first) + 0.5 * _sine_product(grid, second)))
    return samples
