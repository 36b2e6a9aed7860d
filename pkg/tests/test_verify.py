import numpy as np
import pytest
from pydantic import ValidationError

from src.discretize.grid import DomainSpec, build_grid
from src.discretize.operators import ScalarField, horizontal_gradient, p_energy
from src.geometry.metric import build_reachability_graph, control_distance_field
from src.solvers.eigensolve import EigenResult, SolverConfig, second_mode_p2, solve_p2
from src.utils.errors import PreconditionError
from src.verify.base_check import CheckReport, Verdict
from src.verify.eigenfunction import (
    gap_check,
    monotonicity_check,
    positivity_check,
    sign_change_check,
    simplicity_check,
)
from src.verify.fields import random_admissible_fields, sign_changing_samples
from src.verify.inequalities import convexity_check, convexity_constants, lattice_check, poincare_check
from src.verify.regularity import harnack_check, holder_check, refinement_stable
from src.verify.suite import SuiteOptions, center_node, exit_code, run_suite


def _result(grid, values):
    return EigenResult(p=2.0, lambda1=1.0, u1=ScalarField(grid, values), residual=0.0, iterations=0)


def _distance_field(frame, grid, source=None):
    source = center_node(grid) if source is None else source
    return control_distance_field(build_reachability_graph(frame, grid), source)


# convexity

@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("m_dim", [2, 3])
def test_convexity_suite(p, m_dim):
    report = convexity_check(p, 100000, seed=7, m_dim=m_dim)
    assert report.passed
    assert report.statistic > 0
    if p >= 2:
        assert report.statistic <= 1.0


def test_convexity_is_identity_at_two():
    report = convexity_check(2.0, 100000, seed=3, m_dim=3)
    assert report.statistic == pytest.approx(1.0, abs=1e-12)


def test_convexity_skips_equal_pairs():
    w = np.random.default_rng(0).standard_normal((5, 2))
    constants, skipped = convexity_constants(w, w.copy(), 3.0)
    assert constants.size == 0
    assert skipped == 5


def test_convexity_from_origin_is_one():
    w2 = np.random.default_rng(1).standard_normal((50, 3))
    constants, _ = convexity_constants(np.zeros_like(w2), w2, 3.0)
    np.testing.assert_allclose(constants, 1.0)


# eigenfunction shape

def test_positivity(euclidean2, unit_square):
    grid = unit_square(16)
    res = solve_p2(euclidean2, grid, SolverConfig(p=2.0))
    report = positivity_check(res)
    assert report.passed
    assert report.statistic > 0

    values = np.ones(grid.n_interior)
    values[7] = 0.0
    assert not positivity_check(_result(grid, values)).passed
    values[7] = -1e-3
    assert positivity_check(_result(grid, values)).verdict == Verdict.FAIL


def test_sign_change(euclidean2, unit_square):
    grid = unit_square(32)
    cfg = SolverConfig(p=2.0)
    first = solve_p2(euclidean2, grid, cfg)
    second = second_mode_p2(euclidean2, grid, cfg, first)

    assert sign_change_check(first.u1).details == "no sign change"
    assert sign_change_check(first.u1).passed
    assert sign_change_check(ScalarField(grid, np.ones(grid.n_interior))).passed

    changed = sign_change_check(second.u1, expect_change=True)
    assert changed.passed
    assert changed.statistic < 0
    assert gap_check(first, second).passed


def test_sign_change_of_zero_field(unit_square):
    grid = unit_square(6)
    with pytest.raises(PreconditionError):
        sign_change_check(ScalarField(grid, np.zeros(grid.n_interior)))


def test_simplicity_linear(euclidean2, unit_square):
    report = simplicity_check(euclidean2, unit_square(16), SolverConfig(p=2.0), k=5)
    assert report.passed
    spread = float(report.details.split("lambda_spread=")[1])
    assert spread <= 1e-8


def test_simplicity_identical_seeds(grushin, grushin_box):
    report = simplicity_check(grushin, grushin_box(15), SolverConfig(p=2.5), k=2, seeds=[4, 4])
    assert report.statistic == 0.0
    assert report.passed


def test_simplicity_inconclusive_without_convergence(grushin, grushin_box):
    report = simplicity_check(grushin, grushin_box(15), SolverConfig(p=2.5, max_iter=2), k=2)
    assert report.verdict == Verdict.INCONCLUSIVE
    assert not report.passed


@pytest.mark.slow
def test_simplicity_grushin(grushin, grushin_box):
    report = simplicity_check(grushin, grushin_box(48), SolverConfig(p=2.5), k=10)
    assert report.passed


# regularity

def test_harnack_constant_and_positive_fields(euclidean2, unit_square, rng):
    grid = unit_square(24)
    df = _distance_field(euclidean2, grid)
    ones = ScalarField(grid, np.ones(grid.n_interior))
    assert harnack_check(ones, df, 0.1).statistic == 1.0

    positive = ScalarField(grid, rng.uniform(0.5, 2.0, grid.n_interior))
    report = harnack_check(positive, df, 0.1)
    assert report.statistic >= 1.0
    assert report.passed


def test_harnack_ball_must_stay_inside(euclidean2, unit_square):
    grid = unit_square(24)
    df = _distance_field(euclidean2, grid)
    with pytest.raises(PreconditionError):
        harnack_check(ScalarField(grid, np.ones(grid.n_interior)), df, 0.2)


@pytest.mark.slow
def test_harnack_refinement(euclidean2, unit_square):
    quotients = []
    for resolution in (64, 128):
        grid = unit_square(resolution)
        res = solve_p2(euclidean2, grid, SolverConfig(p=2.0))
        report = harnack_check(res.u1, _distance_field(euclidean2, grid), 0.1)
        assert report.passed
        quotients.append(report.statistic)
    assert refinement_stable(quotients).passed


def test_holder_constant_field(euclidean2, unit_square):
    grid = unit_square(12)
    df = _distance_field(euclidean2, grid)
    assert holder_check(ScalarField(grid, np.ones(grid.n_interior)), [df], 0.5).statistic == 0.0


def test_holder_of_distance_function(euclidean2, unit_square):
    grid = unit_square(16)
    graph = build_reachability_graph(euclidean2, grid)
    df = control_distance_field(graph, center_node(grid))
    u = ScalarField(grid, df.values)
    others = [control_distance_field(graph, s) for s in (0, 17, 100)]
    assert holder_check(u, [df] + others, 1.0).statistic <= 1 + 1e-6


@pytest.mark.slow
def test_holder_refinement_grushin(grushin, grushin_box):
    statistics = []
    for resolution in (48, 96):
        grid = grushin_box(resolution)
        res = solve_p2(grushin, grid, SolverConfig(p=2.0))
        report = holder_check(res.u1, [_distance_field(grushin, grid)], 0.5)
        statistics.append(report.statistic)
    assert refinement_stable(statistics).passed


def test_refinement_stable():
    assert refinement_stable([1.0, 1.2, 1.3]).passed
    assert not refinement_stable([1.0, 2.0]).passed
    assert not refinement_stable([1.0, np.inf]).passed


# inequalities

def test_poincare_inequality(grushin, grushin_box):
    grid = grushin_box(17)
    res = solve_p2(grushin, grid, SolverConfig(p=2.0))
    report = poincare_check(grushin, grid, res, 100, seed=5)
    assert report.passed
    assert report.statistic <= 1 + 1e-10


def test_random_fields_are_admissible(grushin_box):
    grid = grushin_box(9)
    fields = random_admissible_fields(grid, 10, seed=0)
    assert len(fields) == 10
    assert all(np.any(f.values != 0) for f in fields)
    again = random_admissible_fields(grid, 10, seed=0)
    np.testing.assert_array_equal(fields[3].values, again[3].values)


def test_lattice_nonnegative_field(euclidean2, unit_square):
    grid = unit_square(16)
    u = ScalarField(grid, np.abs(sign_changing_samples(grid)[0].values))
    assert lattice_check(euclidean2, grid, [u]).statistic == 0.0


def test_lattice_even_in_sign(grushin, grushin_box):
    grid = grushin_box(16)
    u = sign_changing_samples(grid)[0]
    energy = p_energy(horizontal_gradient(grushin, grid, u), 2.0)
    assert p_energy(horizontal_gradient(grushin, grid, -u), 2.0) == pytest.approx(energy, rel=1e-14)


def test_lattice_refinement(euclidean2, unit_square):
    coarse_grid, fine_grid = unit_square(64), unit_square(128)
    coarse = lattice_check(euclidean2, coarse_grid, sign_changing_samples(coarse_grid))
    fine = lattice_check(euclidean2, fine_grid, sign_changing_samples(fine_grid), reference=coarse)
    assert coarse.statistic > 0
    assert fine.passed
    assert fine.statistic < coarse.statistic
    assert "split=" in fine.details


# monotonicity

def _subbox(resolution, bounds, inner):
    return build_grid(DomainSpec(bounds=bounds, mask="subbox", inner_bounds=inner), resolution)


def test_monotonicity_equal_masks(grushin, grushin_box):
    report = monotonicity_check(grushin, SolverConfig(p=2.0), grushin_box(17), grushin_box(17))
    assert report.statistic == pytest.approx(1.0, rel=1e-12)
    assert report.passed


def test_monotonicity_half_square(euclidean2, unit_square):
    outer = unit_square(65)
    inner = _subbox(65, [(0, 1), (0, 1)], [(0.25, 0.75), (0.25, 0.75)])
    report = monotonicity_check(euclidean2, SolverConfig(p=2.0), inner, outer)
    assert report.passed
    assert report.statistic == pytest.approx(4.0, rel=0.03)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_monotonicity_grushin(grushin, grushin_box, p):
    outer = grushin_box(33)
    inner = _subbox(33, [(-1, 1), (-1, 1)], [(-0.5, 0.5), (-0.5, 0.5)])
    report = monotonicity_check(grushin, SolverConfig(p=p), inner, outer)
    assert report.passed
    assert report.statistic > 1.0


def test_monotonicity_heisenberg(heisenberg, heisenberg_box):
    outer = heisenberg_box(9)
    inner = _subbox(9, [(-1, 1)] * 3, [(-0.6, 0.6)] * 3)
    assert monotonicity_check(heisenberg, SolverConfig(p=2.0), inner, outer).passed


def test_monotonicity_needs_nesting(euclidean2, unit_square):
    a = _subbox(17, [(0, 1), (0, 1)], [(0.0, 0.6), (0.0, 0.6)])
    b = _subbox(17, [(0, 1), (0, 1)], [(0.4, 1.0), (0.4, 1.0)])
    with pytest.raises(PreconditionError):
        monotonicity_check(euclidean2, SolverConfig(p=2.0), a, b)


# reports and suite

def test_report_verdict_must_match():
    with pytest.raises(ValidationError):
        CheckReport(name="x", passed=True, statistic=0.0, threshold=0.0, verdict=Verdict.FAIL)


def test_exit_codes():
    def report(verdict):
        return CheckReport(
            name="x", passed=verdict == Verdict.PASS, statistic=0.0, threshold=0.0, verdict=verdict
        )
    assert exit_code([report(Verdict.PASS)]) == 0
    assert exit_code([report(Verdict.PASS), report(Verdict.INCONCLUSIVE)]) == 2
    assert exit_code([report(Verdict.INCONCLUSIVE), report(Verdict.FAIL)]) == 1


def test_default_suite_passes(euclidean2, unit_square):
    options = SuiteOptions(convexity_samples=2000, poincare_fields=20, simplicity_runs=2)
    reports = run_suite(euclidean2, unit_square(12), SolverConfig(p=2.0), options)
    names = [r.name for r in reports]
    assert names[0] == "convexity"
    assert {"positivity", "poincare", "lattice", "simplicity", "gap", "harnack", "holder", "monotonicity"} <= set(names)
    assert names[-3:] == ["lattice_refinement", "harnack_refinement", "holder_refinement"]
    assert exit_code(reports) == 0, [r for r in reports if not r.passed]

    by_name = {r.name: r for r in reports}
    assert by_name["lattice_refinement"].threshold == by_name["lattice"].statistic
    assert "resolution=(23, 23)" in by_name["lattice_refinement"].details
    assert np.isfinite(by_name["harnack_refinement"].statistic)


def test_refinement_can_be_turned_off(euclidean2, unit_square):
    options = SuiteOptions(convexity_samples=200, poincare_fields=5, simplicity_runs=2, refinement=False)
    reports = run_suite(euclidean2, unit_square(10), SolverConfig(p=2.0), options)
    assert not any(r.name.endswith("_refinement") for r in reports)


def test_quick_suite_is_deterministic(grushin, grushin_box):
    options = SuiteOptions(suite="quick", convexity_samples=1000, poincare_fields=10)
    cfg = SolverConfig(p=2.5)
    first = run_suite(grushin, grushin_box(13), cfg, options)
    second = run_suite(grushin, grushin_box(13), cfg, options)
    assert [r.row() for r in first] == [r.row() for r in second]


def test_quick_suite_sublinear(euclidean2, unit_square):
    options = SuiteOptions(suite="quick", convexity_samples=2000, poincare_fields=20)
    reports = run_suite(euclidean2, unit_square(32), SolverConfig(p=1.5), options)
    assert "eigensolve" not in [r.name for r in reports]
    assert exit_code(reports) == 0, [r for r in reports if not r.passed]
