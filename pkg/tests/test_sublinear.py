import math

import numpy as np
import pytest

from wolff_toolkit.src.measures.measure_core import scale
from wolff_toolkit.src.measures.operator import OperatorSpec
from wolff_toolkit.src.measures.radial import RadialMeasure
from wolff_toolkit.src.potentials.profiles import RadialProfile, log_mesh, sup_relative_difference
from wolff_toolkit.src.solvers.radial_solver import solve_entire_radial
from wolff_toolkit.src.solvers.sublinear import (
    SublinearProblem,
    contraction_experiment,
    descending_scheme,
    existence_report,
    predicted_contraction_steps,
    product_measure,
    reachable_sublinear_radial,
    residual_check,
    sublinear_fixed_point_radial,
)
from wolff_toolkit.src.utils.errors import DomainError, PreconditionError
from wolff_toolkit.src.verify import uniqueness_battery

MESH = log_mesh(1e-3, 1e3, 61)


def _problem(sigma, mu, p=2.0, q=0.5):
    return SublinearProblem(sigma, mu, q, OperatorSpec(p, sigma.n))


def test_sublinear_parameters_are_validated(unit_ball, zero_radial):
    with pytest.raises(DomainError):
        _problem(unit_ball, zero_radial, p=2.0, q=1.0)
    with pytest.raises(DomainError):
        _problem(unit_ball, zero_radial, p=2.0, q=0.0)
    with pytest.raises(DomainError):
        SublinearProblem(unit_ball, RadialMeasure.zero(4), 0.5, OperatorSpec(2.0, 3))


def test_product_measure_with_unit_profile(unit_ball):
    ones = RadialProfile(MESH, np.ones_like(MESH), 0.0, 3, "one")
    nu = product_measure(unit_ball, ones, 0.5)
    radii = np.array([0.1, 0.5, 1.0, 7.0])
    np.testing.assert_allclose(nu.mass(radii), unit_ball.mass(radii), rtol=1e-10)


def test_zero_data_converges_immediately(zero_radial):
    u, trace = sublinear_fixed_point_radial(_problem(zero_radial, zero_radial), MESH)
    assert trace.converged
    assert trace.iterations == 1
    assert u.sup() == 0.0


def test_zero_sigma_reduces_to_linear_solve(unit_mass_ball, zero_radial):
    u, trace = sublinear_fixed_point_radial(_problem(zero_radial, unit_mass_ball), MESH)
    assert trace.converged
    expected = solve_entire_radial(unit_mass_ball, 2.0, 3, MESH)
    np.testing.assert_allclose(u.values, expected.values, rtol=1e-10)


@pytest.mark.parametrize("p,q", [(2.0, 0.5), (2.0, 0.9), (2.5, 1.0)])
def test_fixed_point_residual(unit_mass_ball, p, q):
    prob = _problem(scale(unit_mass_ball, 0.1), unit_mass_ball, p=p, q=q)
    u, trace = sublinear_fixed_point_radial(prob, MESH)
    assert trace.converged
    assert trace.monotone
    assert residual_check(prob, u) <= 1e-6


@pytest.mark.parametrize("lam", [0.1, 10.0])
def test_fixed_point_scaling(unit_mass_ball, zero_radial, lam):
    # σ ↦ λσ при μ = 0: u ↦ λ^{1/(p−1−q)} u, здесь λ²
    base, _ = sublinear_fixed_point_radial(_problem(unit_mass_ball, zero_radial), MESH)
    scaled, _ = sublinear_fixed_point_radial(_problem(scale(unit_mass_ball, lam), zero_radial), MESH)
    assert sup_relative_difference(scaled.values, lam**2 * base.values) <= 1e-6


def test_contraction_trivial_for_c0_one(unit_mass_ball, zero_radial):
    trace = contraction_experiment(_problem(unit_mass_ball, zero_radial), MESH, 1.0)
    assert trace.converged
    assert trace.iterations == 0
    assert predicted_contraction_steps(1.0, 0.5, 1e-6) == 0


def test_contraction_is_exact_without_mu(unit_mass_ball, zero_radial):
    prob = _problem(unit_mass_ball, zero_radial)
    u, _ = sublinear_fixed_point_radial(prob, MESH)
    trace, v = descending_scheme(prob, u, 10.0)
    assert trace.converged and trace.monotone
    for record in trace.records:
        assert record.ln_rho == pytest.approx(0.5**record.j * math.log(10.0), abs=1e-6)
        assert record.ln_rho <= record.bound
    assert sup_relative_difference(v.values, u.values) <= 1e-5


def test_contraction_bound_with_mu(unit_mass_ball):
    prob = _problem(unit_mass_ball, scale(unit_mass_ball, 0.5))
    trace = contraction_experiment(prob, MESH, 10.0)
    assert trace.converged
    for record in trace.records:
        assert record.ln_rho <= 0.5**record.j * math.log(10.0) + 1e-6


def test_descending_scheme_preconditions(unit_mass_ball, zero_radial):
    prob = _problem(unit_mass_ball, zero_radial)
    u, _ = sublinear_fixed_point_radial(prob, MESH)
    with pytest.raises(DomainError):
        descending_scheme(prob, u, 0.5)
    zero = RadialProfile(MESH, np.zeros_like(MESH), -1.0, 3, "u")
    with pytest.raises(PreconditionError):
        descending_scheme(prob, zero, 2.0)


def test_predicted_steps_follow_log_recursion():
    # ln 10 · 0.5^j < ~1e-6 впервые при j = 22
    assert predicted_contraction_steps(10.0, 0.5, 1e-6) == 22
    assert predicted_contraction_steps(100.0, 0.5, 1e-6) > predicted_contraction_steps(2.0, 0.5, 1e-6)


def test_uniqueness_battery_passes(unit_mass_ball, zero_radial):
    summary = uniqueness_battery(_problem(unit_mass_ball, zero_radial), MESH, [2.0, 10.0, 100.0])
    assert summary.passed
    assert all(row["count_match"] for row in summary.rows)
    assert all(row["agreement"] <= 1e-5 for row in summary.rows)
    assert set(summary.rate_table["C0"]) == {2.0, 10.0, 100.0}
    assert summary.to_dict()["failing_C0"] == []


def test_reachable_sublinear_ladder(unit_ball, zero_radial):
    ladder = reachable_sublinear_radial(_problem(unit_ball, zero_radial), MESH, [0.5, 1.0, 2.0])
    assert ladder.below_limit
    assert ladder.trace.monotone
    assert ladder.trace.records[-1].sup_ratio <= 1e-6


def test_existence_report(unit_ball, zero_radial):
    t_mesh = np.geomspace(0.05, 50.0, 13)
    report = existence_report(unit_ball, zero_radial, 2.0, 0.5, t_mesh)
    assert report.overall == "holds"
    assert report.to_dict()["sigma_finiteness"] == "holds"

    infinite_mu = RadialMeasure.from_tail(1.0, 1.0, 0.0, 3, 10.0)
    report = existence_report(unit_ball, infinite_mu, 2.0, 0.5, t_mesh)
    assert report.mu_condition == "fails"
    assert report.overall == "fails"


@pytest.mark.slow
def test_uniqueness_battery_near_the_linear_limit(unit_mass_ball, zero_radial):
    # θ = 0.9: сжатие медленное, но число шагов по-прежнему предсказуемо
    prob = _problem(unit_mass_ball, zero_radial, q=0.9)
    assert prob.theta == pytest.approx(0.9)
    summary = uniqueness_battery(prob, MESH, [2.0, 10.0, 100.0])
    assert summary.passed
    for row in summary.rows:
        assert abs(row["iterations"] - row["predicted_iterations"]) <= 2
        assert row["count_match"]
