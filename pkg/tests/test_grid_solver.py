import math

import numpy as np
import pytest

from wolff_toolkit.src.measures.grid import GridMeasure
from wolff_toolkit.src.measures.measure_core import grid_from_radial
from wolff_toolkit.src.measures.operator import OperatorSpec
from wolff_toolkit.src.potentials.profiles import sup_relative_difference
from wolff_toolkit.src.solvers.grid_solver import (
    CellSet,
    SolveConfig,
    _Energy,
    compare_fields,
    cut_fractions,
    difference_operators,
    discretization_slack,
    ladder_trace,
    minimal_solution_grid,
    p_capacity,
    solve_dirichlet_grid,
    sublinear_minimal_grid,
)
from wolff_toolkit.src.solvers.radial_solver import solve_ball_radial
from wolff_toolkit.src.solvers.sublinear import SublinearProblem, sublinear_fixed_point_radial
from wolff_toolkit.src.tasks import condenser_capacity
from wolff_toolkit.src.utils.errors import DomainError, InvariantError

FAST = SolveConfig.from_settings(inner_tolerance=1e-6)


def _bump(n, h, L, radius, level=1.0):
    g = GridMeasure.zeros(n, h, L)
    return g.with_density(np.where(g.distance_from() <= radius, level, 0.0))


def test_difference_operators_shape():
    ops = difference_operators(5, 2, 0.5)
    assert len(ops) == 2
    assert all(D.shape == (25, 25) for D in ops)
    ones = np.ones(25)
    for D in ops:
        assert np.allclose(D @ ones, 0.0)
    # вдоль второй оси (последней в row-major) соседние узлы идут подряд
    ramp = np.tile(np.arange(5, dtype=float), 5)
    slope = (ops[1] @ ramp).reshape(5, 5)
    assert np.allclose(slope[:, :-1], 2.0)
    assert np.allclose(slope[:, -1], 0.0)


def test_solve_config_validation():
    with pytest.raises(InvariantError):
        SolveConfig.from_settings(epsilon_schedule=(1e-6, 1e-4))
    with pytest.raises(InvariantError):
        SolveConfig.from_settings(epsilon_schedule=(1e-2, 1e-4))
    with pytest.raises(DomainError):
        SolveConfig.from_settings(domain="torus")
    cfg = SolveConfig.from_settings().on_ball(0.5)
    assert cfg.domain == "ball" and cfg.radius == 0.5
    with pytest.raises(DomainError):
        cfg.on_ball(2.0).interior(GridMeasure.zeros(2, 0.25, 1.0))


def test_discretization_slack():
    assert discretization_slack(0.125) == pytest.approx(1.25)


def test_zero_measure_gives_zero_field():
    u = solve_dirichlet_grid(GridMeasure.zeros(2, 0.25, 1.0), OperatorSpec(1.5, 2))
    assert u.sup() == 0.0
    assert u.info["residual_history"] == [0.0]


def test_mass_outside_domain_is_rejected():
    g = GridMeasure.zeros(2, 0.25, 1.0)
    density = np.zeros(g.density.shape)
    density[0, 0] = 1.0
    with pytest.raises(DomainError):
        solve_dirichlet_grid(g.with_density(density), OperatorSpec(1.5, 2), FAST.on_ball(1.0))


def test_solution_vanishes_off_domain_and_is_positive_inside():
    nu = _bump(2, 0.125, 1.0, 0.5)
    u = solve_dirichlet_grid(nu, OperatorSpec(1.5, 2), FAST.on_ball(1.0))
    assert np.all(u.values[~u.interior] == 0.0)
    assert u.values[8, 8] > 0.0
    assert u.info["residual_history"][-1] <= 1e-6


def test_linear_homogeneity_for_p2():
    nu = _bump(3, 0.25, 1.0, 0.5)
    op = OperatorSpec(2.0, 3)
    u = solve_dirichlet_grid(nu, op)
    v = solve_dirichlet_grid(nu.scaled(3.0), op)
    assert sup_relative_difference(v.values, 3.0 * u.values) <= 1e-5


def test_comparison_with_half_measure():
    nu = _bump(2, 0.125, 1.0, 0.5)
    op = OperatorSpec(1.5, 2)
    u = solve_dirichlet_grid(nu, op, FAST)
    half = solve_dirichlet_grid(nu.scaled(0.5), op, FAST)
    report = compare_fields(half, u, discretization_slack(nu.h))
    assert report.max_violation <= discretization_slack(nu.h)
    assert report.violating_cell_fraction == 0.0
    with pytest.raises(DomainError):
        compare_fields(u, solve_dirichlet_grid(GridMeasure.zeros(2, 0.25, 1.0), op), 0.0)


def test_minimal_ladder_reaches_the_ball_solution():
    sigma = _bump(3, 0.25, 1.0, 0.5, level=1e-3)
    op = OperatorSpec(2.0, 3)
    fields = minimal_solution_grid(sigma, op, [0.5, 0.75, 1.0], FAST)
    assert all(u.info["monotone"] for u in fields)
    # W̃ мала, срезка по уровню ничего не убирает
    assert fields[0].info["max_wolff"] < 0.5
    assert fields[-1].info["restricted_mass"] == pytest.approx(sigma.total_mass())
    direct = solve_dirichlet_grid(sigma, op, FAST.on_ball(1.0))
    np.testing.assert_allclose(fields[-1].values, direct.values, rtol=0, atol=1e-12 * direct.sup())
    trace = ladder_trace(fields)
    assert trace.monotone
    assert [r.j for r in trace.records] == [0, 1, 2]
    with pytest.raises(InvariantError):
        minimal_solution_grid(sigma, op, [1.0, 0.5], FAST)


def test_sublinear_grid_scheme():
    sigma = _bump(3, 0.25, 1.0, 0.5)
    op = OperatorSpec(2.0, 3)
    u, trace = sublinear_minimal_grid(sigma, sigma, 0.5, op, FAST)
    assert trace.converged
    assert trace.monotone
    linear = solve_dirichlet_grid(sigma, op, FAST)
    assert np.all(u.values >= linear.values - discretization_slack(sigma.h))
    with pytest.raises(DomainError):
        sublinear_minimal_grid(sigma, GridMeasure.zeros(3, 0.5, 1.0), 0.5, op, FAST)


def test_capacity_basics():
    grid = GridMeasure.zeros(2, 0.125, 1.0)
    op = OperatorSpec(1.5, 2)
    cfg = FAST.on_ball(1.0)
    assert p_capacity(CellSet(np.zeros(grid.density.shape, dtype=bool), grid), op, cfg) == 0.0
    small = p_capacity(CellSet.ball(grid, 0.25), op, cfg)
    large = p_capacity(CellSet.ball(grid, 0.5), op, cfg)
    assert 0.0 < small < large
    with pytest.raises(DomainError):
        p_capacity(CellSet.ball(grid, 1.0), op, cfg)


@pytest.mark.slow
def test_green_value_of_unit_mass_ball(unit_mass_ball):
    # u(2) на B(0,4) для единичной массы: (1/2 − 1/4)/(4π) = 1/(16π)
    nu = grid_from_radial(unit_mass_ball, 4.0, 0.25)
    u = solve_dirichlet_grid(nu, OperatorSpec(2.0, 3), FAST.on_ball(4.0))
    center = nu.N // 2
    value = u.values[center + 8, center, center]
    assert value == pytest.approx(1.0 / (16.0 * math.pi), rel=0.05)


@pytest.mark.slow
def test_condenser_capacity_refines():
    # 4π / (1/a − 1/R) при a = 1/2, R = 2
    exact = condenser_capacity(0.5, 2.0, 2.0, 3)
    assert exact == pytest.approx(4.0 * math.pi / 1.5)
    errors = []
    for h in (0.125, 0.0625):
        grid = GridMeasure.zeros(3, h, 2.0)
        cap = p_capacity(CellSet.ball(grid, 0.5), OperatorSpec(2.0, 3), FAST.on_ball(2.0))
        errors.append(abs(cap / exact - 1.0))
    assert errors[0] <= 0.10
    assert errors[1] <= 0.05
    assert errors[1] < errors[0]


def test_capacity_is_monotone_in_the_plate():
    grid = GridMeasure.zeros(3, 0.25, 1.0)
    op = OperatorSpec(2.0, 3)
    cfg = FAST.on_ball(1.0)
    caps = [p_capacity(CellSet.ball(grid, a), op, cfg) for a in (0.0, 0.25, 0.5)]
    assert 0.0 < caps[0] <= caps[1] <= caps[2]


def test_sublinear_grid_without_sigma_is_the_linear_solve():
    mu = _bump(2, 0.125, 1.0, 0.5)
    op = OperatorSpec(1.5, 2)
    zero = GridMeasure.zeros(2, 0.125, 1.0)
    u, trace = sublinear_minimal_grid(zero, mu, 0.25, op, FAST)
    assert trace.converged
    assert trace.iterations <= 2
    direct = solve_dirichlet_grid(mu, op, FAST)
    assert sup_relative_difference(u.values, direct.values) <= 1e-5
    empty, _ = sublinear_minimal_grid(zero, zero, 0.25, op, FAST)
    assert empty.sup() == 0.0


@pytest.mark.slow
def test_grid_matches_radial_ball_solution(unit_mass_ball):
    # sup-относительная ошибка внутри шара B(0,2) убывает при h → h/2
    errors = []
    for h in (0.25, 0.125):
        nu = grid_from_radial(unit_mass_ball, 2.0, h)
        u = solve_dirichlet_grid(nu, OperatorSpec(2.0, 3), FAST.on_ball(2.0))
        rho = nu.distance_from()[u.interior]
        radii = np.unique(rho)
        profile = solve_ball_radial(unit_mass_ball, 2.0, 3, radii, 2.0)
        oracle = profile.evaluate(rho)
        errors.append(float(np.max(np.abs(u.values[u.interior] - oracle)) / oracle.max()))
    assert errors[0] <= 0.05
    assert errors[1] < errors[0]

def test_cut_fractions_box_and_ball():
    grid = GridMeasure.zeros(2, 0.25, 1.0)
    box = SolveConfig.from_settings()
    inside = box.interior(grid)
    assert all(np.all(theta == 1.0) for theta in cut_fractions(grid, inside, ~inside, box.crossing(grid)))
    # граница шара R = 0.9 между узлами 0.75 и 1.0: θ = 0.6 с обеих сторон
    ball = box.on_ball(0.9)
    inside = ball.interior(grid)
    fractions = cut_fractions(grid, inside, ~inside, ball.crossing(grid))
    assert fractions[0][7, 4] == pytest.approx(0.6)
    assert fractions[0][0, 4] == pytest.approx(0.6)
    assert fractions[1][4, 7] == pytest.approx(0.6)
    assert all(np.all((theta >= 0.1) & (theta <= 1.0)) for theta in fractions)


def test_capacity_plate_remembers_its_ball():
    grid = GridMeasure.zeros(3, 0.25, 1.0)
    plate = CellSet.ball(grid, 0.4, (0.25, 0.0, 0.0))
    assert plate.radius == 0.4 and plate.center == (0.25, 0.0, 0.0)
    assert len(plate) == int(grid.ball_mask(0.4, (0.25, 0.0, 0.0)).sum())


def test_hessian_matches_gradient_differences():
    grid = GridMeasure.zeros(2, 0.25, 1.0)
    cfg = FAST.on_ball(1.0)
    inside = cfg.interior(grid)
    energy = _Energy(OperatorSpec(1.5, 2), grid, inside, cut_fractions(grid, inside, ~inside, cfg.crossing(grid)))
    rng = np.random.default_rng(3)
    x = rng.uniform(0.0, 1.0, energy.free.size)
    v = rng.normal(size=energy.free.size)
    rhs = np.zeros(grid.density.size)
    eps, delta = 1e-2, 1e-6
    plus = energy.value_and_gradient(x + delta * v, eps, rhs)[1]
    minus = energy.value_and_gradient(x - delta * v, eps, rhs)[1]
    np.testing.assert_allclose(energy.hessian(x, eps) @ v, (plus - minus) / (2 * delta), rtol=1e-4, atol=1e-8)


@pytest.mark.parametrize("level", [3.0, 10.0])
def test_scaled_data_converges_with_default_settings(level):
    # невязка относительная: масштаб данных не мешает сходимости
    nu = _bump(3, 0.25, 1.0, 0.5, level=level)
    op = OperatorSpec(2.0, 3)
    u = solve_dirichlet_grid(nu, op)
    assert u.info["residual_history"][-1] <= SolveConfig.from_settings().inner_tolerance
    assert u.info["residual_scale"] >= level
    unit = solve_dirichlet_grid(nu.scaled(1.0 / level), op)
    assert sup_relative_difference(u.values, level * unit.values) <= 1e-5


def test_energy_history_is_nonincreasing():
    nu = _bump(2, 0.125, 1.0, 0.5)
    u = solve_dirichlet_grid(nu, OperatorSpec(1.5, 2), FAST.on_ball(1.0))
    history = np.array(u.info["energy_history"])
    assert history.size >= 2
    assert np.all(np.diff(history) <= 1e-12 * np.abs(history[:-1]))


@pytest.mark.parametrize("lam", [0.1, 10.0])
def test_homogeneity_of_degree_one_over_p_minus_one(lam):
    # ν ↦ λν даёт u ↦ λ^{1/(p−1)} u
    nu = _bump(2, 0.125, 1.0, 0.5)
    op = OperatorSpec(1.5, 2)
    u = solve_dirichlet_grid(nu, op)
    v = solve_dirichlet_grid(nu.scaled(lam), op)
    assert sup_relative_difference(v.values, lam**2.0 * u.values) <= 1e-4


@pytest.mark.slow
def test_comparison_on_ordered_random_pairs():
    op = OperatorSpec(1.5, 2)
    rng = np.random.default_rng(11)
    worst = {}
    for h in (0.25, 0.125):
        grid = GridMeasure.zeros(2, h, 1.0)
        cfg = FAST.on_ball(1.0)
        inside = cfg.interior(grid)
        worst[h] = 0.0
        for _ in range(10):
            center = rng.uniform(-0.4, 0.4, 2)
            bump = np.where(grid.distance_from(center) <= 0.3, rng.uniform(0.5, 2.0), 0.0) * inside
            extra = np.where(grid.distance_from(-center) <= 0.2, rng.uniform(0.0, 1.0), 0.0) * inside
            nu = grid.with_density(bump)
            larger = grid.with_density(bump + extra)
            report = compare_fields(solve_dirichlet_grid(nu, op, cfg), solve_dirichlet_grid(larger, op, cfg), 0.0)
            assert report.max_violation <= discretization_slack(h)
            worst[h] = max(worst[h], report.max_violation)
    assert worst[0.125] <= max(worst[0.25], 1e-6)


@pytest.mark.slow
def test_sublinear_grid_matches_radial_fixed_point(unit_ball, unit_mass_ball):
    # −Δu = σu^{1/2} + μ на B(0,2): сетка против радиального решения
    sigma = grid_from_radial(unit_ball, 2.0, 0.25)
    mu = grid_from_radial(unit_mass_ball, 2.0, 0.25)
    op = OperatorSpec(2.0, 3)
    u, trace = sublinear_minimal_grid(sigma, mu, 0.5, op, FAST.on_ball(2.0))
    assert trace.converged
    rho = sigma.distance_from()[u.interior]
    prob = SublinearProblem(unit_ball, unit_mass_ball, 0.5, op, outer_radius=2.0)
    profile, ascending = sublinear_fixed_point_radial(prob, np.unique(rho))
    assert ascending.converged
    oracle = profile.evaluate(rho)
    assert float(np.max(np.abs(u.values[u.interior] - oracle)) / oracle.max()) <= 0.05
