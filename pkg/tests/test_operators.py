import numpy as np
import pytest

from src.discretize.operators import (
    HField,
    ScalarField,
    adjoint_apply,
    horizontal_gradient,
    lp_norm,
    natural_norm,
    p_energy,
    p_laplacian_apply,
    poincare_norm,
    rayleigh_quotient,
    sample_field,
    stiffness_matrix,
)
from src.geometry.frames import builtin_frame
from src.utils.errors import ParameterError, PreconditionError
from tests.oracles import box_grid


FRAME_GRIDS = [
    ("euclidean", 2, [(0.0, 1.0), (0.0, 1.0)], 12),
    ("grushin", 2, [(-1.0, 1.0), (-1.0, 1.0)], 13),
    ("heisenberg", 3, [(-1.0, 1.0)] * 3, 7),
]


def _random_field(grid, rng):
    return ScalarField(grid, rng.standard_normal(grid.n_interior))


@pytest.mark.parametrize("name,n,bounds,resolution", FRAME_GRIDS)
def test_discrete_duality(name, n, bounds, resolution, rng):
    frame = builtin_frame(name, n)
    grid = box_grid(bounds, resolution)
    for _ in range(100):
        u = _random_field(grid, rng)
        v = HField(
            grid,
            rng.standard_normal((grid.box_size, frame.m)),
            rng.standard_normal((grid.box_size, frame.m))
        )
        xu = horizontal_gradient(frame, grid, u)
        lhs = xu.inner(v)
        rhs = u.inner(adjoint_apply(frame, grid, v))
        scale = np.sqrt(xu.inner(xu) * v.inner(v))
        assert abs(lhs - rhs) <= 1e-12 * scale


def test_euclidean_stiffness_is_five_point_laplacian(euclidean2, unit_square, rng):
    grid = unit_square(10)
    h = grid.spacing[0]
    values = rng.standard_normal(grid.n_interior)

    box = np.zeros(grid.resolution)
    box.ravel()[grid.interior_index] = values
    padded = np.pad(box, 1)
    laplacian = (
        4 * padded[1:-1, 1:-1]
        - padded[2:, 1:-1] - padded[:-2, 1:-1]
        - padded[1:-1, 2:] - padded[1:-1, :-2]
    ) / h ** 2

    K = stiffness_matrix(euclidean2, grid)
    np.testing.assert_allclose(K @ values, laplacian.ravel()[grid.interior_index], rtol=1e-12, atol=1e-9)


def test_central_gradient_of_quadratic(euclidean2, unit_square):
    grid = unit_square(11)
    u = sample_field(grid, lambda x: x[:, 0] * (1 - x[:, 0]))
    central = horizontal_gradient(euclidean2, grid, u).central()
    np.testing.assert_allclose(central[:, 0], 1 - 2 * grid.interior_points()[:, 0], atol=1e-12)
    np.testing.assert_allclose(central[:, 1], 0.0, atol=1e-12)


def test_central_gradient_is_second_order(grushin, grushin_box):
    spacings, errors = [], []
    for resolution in (17, 33, 65):
        grid = grushin_box(resolution)
        x = grid.interior_points()
        u = sample_field(grid, lambda p: np.cos(np.pi * p[:, 0] / 2) * np.cos(np.pi * p[:, 1] / 2))
        exact = np.column_stack([
            -np.pi / 2 * np.sin(np.pi * x[:, 0] / 2) * np.cos(np.pi * x[:, 1] / 2),
            -np.pi / 2 * x[:, 0] * np.cos(np.pi * x[:, 0] / 2) * np.sin(np.pi * x[:, 1] / 2),
        ])
        central = horizontal_gradient(grushin, grid, u).central()
        spacings.append(grid.spacing[0])
        errors.append(np.abs(central - exact).max())

    slope, _ = np.polyfit(np.log(spacings), np.log(errors), 1)
    assert slope == pytest.approx(2.0, abs=0.3)


def test_sine_mode_quadrature(euclidean2, unit_square):
    grid = unit_square(128)
    u = sample_field(grid, lambda x: np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1]))
    assert p_energy(horizontal_gradient(euclidean2, grid, u), 2.0) == pytest.approx(np.pi ** 2 / 2, rel=0.01)
    assert lp_norm(u, 2.0) == pytest.approx(0.5, rel=0.01)
    assert rayleigh_quotient(euclidean2, grid, u, 2.0) == pytest.approx(2 * np.pi ** 2, rel=0.01)


def test_grushin_second_field_vanishes_on_axis(grushin, grushin_box):
    grid = grushin_box(9)
    u = sample_field(grid, lambda x: np.cos(np.pi * x[:, 1] / 2) * (1 - x[:, 0] ** 2))
    central = horizontal_gradient(grushin, grid, u).central()
    on_axis = np.isclose(grid.interior_points()[:, 0], 0.0)
    np.testing.assert_allclose(central[on_axis, 1], 0.0, atol=1e-14)


@pytest.mark.parametrize("name,n,bounds,resolution", FRAME_GRIDS)
def test_linear_energy_matches_stiffness(name, n, bounds, resolution, rng):
    frame = builtin_frame(name, n)
    grid = box_grid(bounds, resolution)
    u = _random_field(grid, rng)
    K = stiffness_matrix(frame, grid)
    energy = p_energy(horizontal_gradient(frame, grid, u), 2.0)
    assert energy == pytest.approx(u.values @ (K @ u.values) * grid.cell_volume, rel=1e-12)
    np.testing.assert_allclose(p_laplacian_apply(frame, grid, u, 2.0).values, K @ u.values, rtol=1e-12, atol=1e-10)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_p_laplacian_is_energy_gradient(grushin, grushin_box, rng, p):
    grid = grushin_box(11)
    u = _random_field(grid, rng)
    direction = rng.standard_normal(grid.n_interior)
    t = 1e-6

    def energy(values):
        return p_energy(horizontal_gradient(grushin, grid, ScalarField(grid, values)), p)

    numeric = (energy(u.values + t * direction) - energy(u.values - t * direction)) / (2 * t)
    analytic = p * grid.cell_volume * p_laplacian_apply(grushin, grid, u, p).values @ direction
    assert numeric == pytest.approx(analytic, rel=1e-5)


def test_rayleigh_quotient_scale_invariant(heisenberg, heisenberg_box, rng):
    grid = heisenberg_box(7)
    u = _random_field(grid, rng)
    for p in (1.5, 2.0, 4.0):
        assert rayleigh_quotient(heisenberg, grid, 5.0 * u, p) == pytest.approx(
            rayleigh_quotient(heisenberg, grid, u, p), rel=1e-12
        )


def test_rayleigh_quotient_of_zero(euclidean2, unit_square):
    grid = unit_square(6)
    with pytest.raises(PreconditionError):
        rayleigh_quotient(euclidean2, grid, ScalarField(grid, np.zeros(grid.n_interior)), 2.0)


def test_exponent_ranges(euclidean2, unit_square):
    grid = unit_square(6)
    u = ScalarField(grid, np.ones(grid.n_interior))
    with pytest.raises(ParameterError):
        p_energy(horizontal_gradient(euclidean2, grid, u), 1.0)
    with pytest.raises(ParameterError):
        lp_norm(u, 0.5)


def test_norms(euclidean2, unit_square, rng):
    grid = unit_square(8)
    ones = ScalarField(grid, np.ones(grid.n_interior))
    assert lp_norm(ones, 3.0) == pytest.approx(grid.volume ** (1 / 3))

    u = _random_field(grid, rng)
    p = 2.5
    assert natural_norm(euclidean2, grid, u, p) ** p == pytest.approx(
        lp_norm(u, p) ** p + poincare_norm(euclidean2, grid, u, p) ** p
    )


def test_scalar_field_rejects_bad_values(unit_square):
    grid = unit_square(6)
    with pytest.raises(ParameterError):
        ScalarField(grid, np.full(grid.n_interior, np.nan))
    with pytest.raises(ParameterError):
        ScalarField(grid, np.zeros(3))
