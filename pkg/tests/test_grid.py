import numpy as np
import pytest
from pydantic import ValidationError

from src.discretize.grid import DomainSpec, build_grid
from src.utils.errors import ParameterError, PreconditionError, StructuralError


def test_box_boundary_is_exterior(unit_square):
    grid = unit_square(6)
    assert grid.n_interior == 16
    assert not grid.interior_mask[0, :].any()
    assert not grid.interior_mask[:, -1].any()
    assert grid.cell_volume == pytest.approx(0.04)
    assert grid.volume == pytest.approx(16 * 0.04)


def test_interior_points_in_lexicographic_order(unit_square):
    grid = unit_square(5)
    pts = grid.interior_points()
    np.testing.assert_allclose(pts[0], [0.25, 0.25])
    np.testing.assert_allclose(pts[1], [0.25, 0.5])
    np.testing.assert_allclose(pts[-1], [0.75, 0.75])


def test_resolution_too_small():
    with pytest.raises(ParameterError):
        build_grid(DomainSpec(bounds=[(0, 1), (0, 1)]), 3)


def test_resolution_dimension_mismatch():
    with pytest.raises(ParameterError):
        build_grid(DomainSpec(bounds=[(0, 1), (0, 1)]), [8, 8, 8])


def test_disk_mask():
    domain = DomainSpec(bounds=[(-1, 1), (-1, 1)], mask="disk", radius=0.5)
    grid = build_grid(domain, 21)
    pts = grid.interior_points()
    assert np.all(np.linalg.norm(pts, axis=1) < 0.5)
    assert grid.n_interior > 0


def test_empty_interior_rejected():
    domain = DomainSpec(bounds=[(0, 1), (0, 1)], mask="disk", center=[0.5, 0.5], radius=0.01)
    with pytest.raises(StructuralError):
        build_grid(domain, 8)


def test_disk_needs_radius():
    with pytest.raises(ValidationError):
        DomainSpec(bounds=[(0, 1), (0, 1)], mask="disk")


def test_subbox_mask_and_nesting(unit_square):
    outer = unit_square(9)
    domain = DomainSpec(bounds=[(0, 1), (0, 1)], mask="subbox", inner_bounds=[(0.2, 0.8), (0.2, 0.8)])
    inner = build_grid(domain, 9)
    assert np.all(outer.interior_mask[inner.interior_mask])
    assert inner.n_interior == 25


def test_locate(grushin_box):
    grid = grushin_box(5)
    idx = grid.locate([0.0, 0.5])
    np.testing.assert_allclose(grid.interior_points()[idx], [0.0, 0.5])
    with pytest.raises(PreconditionError):
        grid.locate([0.1, 0.0])
    with pytest.raises(PreconditionError):
        grid.locate([-1.0, 0.0])


def test_disconnected_mask_rejected(unit_square):
    grid = unit_square(9)
    mask = np.zeros(grid.resolution, dtype=bool)
    mask[1:3, 1:3] = True
    mask[5:7, 5:7] = True
    with pytest.raises(StructuralError):
        grid.with_mask(mask)


def test_disk_volume():
    domain = DomainSpec(bounds=[(0, 1), (0, 1)], mask="disk", center=[0.5, 0.5], radius=0.5)
    grid = build_grid(domain, 256)
    assert grid.volume == pytest.approx(np.pi / 4, rel=0.02)


def test_midpoints_of_full_cells(unit_square):
    grid = unit_square(5)
    mids = grid.midpoints()
    np.testing.assert_allclose(mids, [[0.375, 0.375], [0.375, 0.625], [0.625, 0.375], [0.625, 0.625]])

    samples = grid.sample_points()
    assert samples.shape == (13, 2)
    np.testing.assert_array_equal(samples[:9], grid.interior_points())


def test_midpoints_reach_the_center_at_even_resolution(grushin_box):
    grid = grushin_box(64)
    assert not np.any(np.all(np.abs(grid.interior_points()) < 1e-12, axis=1))
    assert np.any(np.all(np.abs(grid.midpoints()) < 1e-12, axis=1))


def test_refined_grid_keeps_coarse_nodes():
    domain = DomainSpec(bounds=[(-1, 1), (-1, 1)], mask="disk", radius=0.8)
    coarse = build_grid(domain, 17)
    fine = coarse.refined()
    assert fine.resolution == (33, 33)
    np.testing.assert_allclose(fine.spacing, coarse.spacing / 2)

    for point in coarse.interior_points():
        fine.locate(point)
    assert np.all(coarse.interior_mask[fine.interior_mask[::2, ::2]])
    assert fine.n_interior > 3 * coarse.n_interior
