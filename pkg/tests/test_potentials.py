import math

import numpy as np
import pytest

from wolff_toolkit.src.measures.measure_core import restrict_to_ball, scale
from wolff_toolkit.src.measures.radial import RadialMeasure
from wolff_toolkit.src.potentials.intrinsic import (
    embedding_exponent,
    intrinsic_potential,
    kappa_lower_bound,
)
from wolff_toolkit.src.potentials.profiles import RadialProfile, log_mesh
from wolff_toolkit.src.potentials.quadrature import integrate_down_to_zero, integrate_up_to_infinity
from wolff_toolkit.src.potentials.wolff import (
    DIVERGENT,
    check_finiteness,
    riesz_I1,
    sphere_area,
    wolff_potential,
    wolff_radial_profile,
)
from wolff_toolkit.src.utils.errors import DomainError, InvariantError


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2.0 * math.pi, rel=1e-15)
    assert sphere_area(3) == pytest.approx(4.0 * math.pi, rel=1e-15)
    assert sphere_area(4) == pytest.approx(2.0 * math.pi**2, rel=1e-15)


def test_quadrature_helpers():
    # ∫_0^1 t^2 dt/t = 1/2 and ∫_1^∞ t^-2 dt/t = 1/2
    down = integrate_down_to_zero(lambda t: t**2, 1.0, 0.0, 1e-12, 20, 4000)
    up = integrate_up_to_infinity(lambda t: t**-2.0, 1.0, 1e-12, 20, 4000)
    assert down == pytest.approx(0.5, rel=1e-10)
    assert up == pytest.approx(0.5, rel=1e-10)


def test_wolff_at_center_of_unit_ball(unit_ball):
    # (4π/3)(∫_0^1 t dt + ∫_1^∞ t^-2 dt) = 2π
    assert wolff_potential(unit_ball, 2.0, 3, 0.0) == pytest.approx(2.0 * math.pi, rel=1e-10)


def test_wolff_off_center_is_newtonian_for_p2(unit_ball):
    # n=3, p=2: W(x) = ∫ dσ(y)/|x − y| = 2π(1 − r²/3) inside, (4π/3)/r outside
    assert wolff_potential(unit_ball, 2.0, 3, 0.5) == pytest.approx(2.0 * math.pi * (1 - 0.25 / 3), rel=1e-7)
    for r in (1.0, 2.0, 4.0, 50.0):
        assert wolff_potential(unit_ball, 2.0, 3, r) == pytest.approx(4.0 * math.pi / (3.0 * r), rel=1e-7)
    assert wolff_potential(unit_ball, 2.0, 3, [0.0, 2.0, 0.0]) == pytest.approx(2.0 * math.pi / 3.0, rel=1e-7)


def test_wolff_profile_decay(unit_ball):
    mesh = log_mesh(1e-2, 1e2, 41)
    profile = wolff_radial_profile(unit_ball, 2.0, 3, mesh)
    assert profile.label == "wolff"
    assert profile.values[0] == pytest.approx(2.0 * math.pi, rel=1e-10)
    ratio = profile.evaluate(4.0) / profile.evaluate(2.0)
    assert float(ratio) == pytest.approx(0.5, rel=0.02)
    assert profile.tail_exponent == pytest.approx(-1.0)
    assert np.all(np.diff(profile.values) <= 1e-12)


def test_wolff_of_zero_measure(zero_radial):
    assert wolff_potential(zero_radial, 2.0, 3, 0.3) == 0.0
    assert riesz_I1(zero_radial, 3, 0.0) == 0.0
    profile = wolff_radial_profile(zero_radial, 2.0, 3, log_mesh(1e-2, 10.0, 5))
    assert profile.sup() == 0.0


def test_wolff_domain_errors(unit_ball):
    with pytest.raises(DomainError):
        wolff_potential(unit_ball, 3.0, 3, 0.0)
    with pytest.raises(DomainError):
        wolff_potential(unit_ball, 1.0, 3, 0.0)
    with pytest.raises(DomainError):
        wolff_potential(unit_ball, 2.0, 4, 0.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 2.5])
@pytest.mark.parametrize("lam", [0.1, 3.0, 250.0])
def test_wolff_homogeneity(unit_ball, p, lam):
    for r in (0.0, 0.7, 3.0):
        base = wolff_potential(unit_ball, p, 3, r)
        scaled = wolff_potential(scale(unit_ball, lam), p, 3, r)
        assert scaled == pytest.approx(lam ** (1.0 / (p - 1.0)) * base, rel=1e-12)


def test_wolff_monotone_in_measure(unit_ball):
    smaller = restrict_to_ball(unit_ball, 0.5)
    for r in (0.0, 0.25, 1.0, 5.0):
        assert wolff_potential(smaller, 2.0, 3, r) <= wolff_potential(unit_ball, 2.0, 3, r)


def test_wolff_additivity_bound():
    rng = np.random.default_rng(7)
    for p in (1.5, 2.5):
        gamma = 1.0 / (p - 1.0)
        for _ in range(5):
            radii = np.sort(rng.uniform(0.1, 4.0, 3))
            masses = np.cumsum(rng.uniform(0.1, 2.0, 3))
            both = RadialMeasure(knots=tuple(zip(radii, masses)), tail=(masses[-1], 0.0, 0.0), n=3)
            cut = float(rng.uniform(radii[0], radii[-1]))
            # σ = σ|B(0,cut) + σ|(cut, 10)
            inner = both.restricted([(0.0, cut)])
            outer = both.restricted([(cut, 10.0)])
            for x in (0.0, 0.5 * cut, 5.0):
                total = wolff_potential(both, p, 3, x)
                bound = 2.0**gamma * (wolff_potential(inner, p, 3, x) + wolff_potential(outer, p, 3, x))
                assert total <= bound * (1.0 + 1e-12)


def test_parallel_profile_matches_sequential(unit_ball):
    mesh = log_mesh(1e-2, 10.0, 16)
    seq = wolff_radial_profile(unit_ball, 2.0, 3, mesh)
    par = wolff_radial_profile(unit_ball, 2.0, 3, mesh, threads=4)
    assert np.array_equal(seq.values, par.values)


@pytest.mark.parametrize("p", [1.5, 2.0, 2.5])
def test_finiteness_tail_family(p):
    n = 3
    b = n - p
    verdicts = []
    for c in (0.0, p - 1.0, 2.0 * (p - 1.0)):
        m = RadialMeasure.from_tail(1.0, b, c, n, 1e3)
        report = check_finiteness(m, p, n)
        verdicts.append(report.verdict)
        origin = wolff_potential(m, p, n, 0.0)
        assert (origin < DIVERGENT) == report.finite
    assert verdicts == ["infinite", "infinite", "finite"]


def test_finiteness_report_contents(unit_ball):
    report = check_finiteness(unit_ball, 2.0, 3)
    assert report.finite
    data = report.to_dict()
    assert set(data) == {"verdict", "tail_integral", "breakdown"}
    # ∫_1^∞ (4π/3) t^-1 dt/t = 4π/3
    assert report.tail_integral_value == pytest.approx(4.0 * math.pi / 3.0, rel=1e-10)

    infinite = check_finiteness(RadialMeasure.from_tail(1.0, 1.0, 0.0, 3, 10.0), 2.0, 3)
    assert infinite.to_dict()["tail_integral"] == "+inf"


def test_riesz_at_center(unit_ball):
    # (4π/3)(∫_0^1 dt + ∫_1^∞ t^-3 dt) = 2π
    assert riesz_I1(unit_ball, 3, 0.0) == pytest.approx(2.0 * math.pi, rel=1e-10)
    tripled = riesz_I1(scale(unit_ball, 3.0), 3, 0.0)
    assert tripled == pytest.approx(3.0 * riesz_I1(unit_ball, 3, 0.0), rel=1e-12)
    assert tripled == pytest.approx(6.0 * math.pi, rel=1e-9)


def test_kappa_dirac_candidate(unit_ball, zero_radial):
    est = kappa_lower_bound(unit_ball, ((0.0, 0.0, 0.0), 1.0), 2.0, 0.5, [(0.0, 0.0, 0.0)])
    dirac = dict(est.candidates)["dirac at (0.0, 0.0, 0.0)"]
    assert dirac == pytest.approx((4.0 * math.pi * 0.4) ** 2, rel=1e-8)
    assert est.lower_bound >= dirac

    empty = kappa_lower_bound(zero_radial, ((0.0, 0.0, 0.0), 1.0), 2.0, 0.5, [(0.0, 0.0, 0.0)])
    assert empty.lower_bound == 0.0

    with pytest.raises(DomainError):
        kappa_lower_bound(unit_ball, ((0.0, 0.0, 0.0), 1.0), 2.0, 0.5, [])


def test_kappa_scaling(unit_ball):
    ball = ((0.0, 0.0, 0.0), 1.0)
    base = kappa_lower_bound(unit_ball, ball, 2.0, 0.5, [(0.0, 0.0, 0.0)]).lower_bound
    scaled = kappa_lower_bound(scale(unit_ball, 3.0), ball, 2.0, 0.5, [(0.0, 0.0, 0.0)]).lower_bound
    assert scaled == pytest.approx(9.0 * base, rel=1e-10)


def test_embedding_exponent_monotone_in_q():
    values = [embedding_exponent(2.0, q) for q in (0.25, 0.5, 0.9)]
    assert values == sorted(values)
    assert values[1] == pytest.approx(1.0)


def test_intrinsic_potential(unit_ball, zero_radial):
    t_mesh = np.geomspace(0.05, 50.0, 13)
    zero = intrinsic_potential(zero_radial, 2.0, 0.5, 3, 0.0, t_mesh)
    assert zero.value == 0.0

    est = intrinsic_potential(unit_ball, 2.0, 0.5, 3, 0.0, t_mesh)
    assert est.verdict == "finite"
    assert 0.0 < est.value < math.inf
    assert est.label == "lower-bound estimate"
    assert est.tail_exponent == pytest.approx(-1.0, abs=0.05)

    with pytest.raises(DomainError):
        intrinsic_potential(unit_ball, 2.0, 0.5, 3, 0.0, [1.0])


def test_profile_invariants():
    with pytest.raises(InvariantError):
        RadialProfile(np.array([0.0, 1.0]), np.array([1.0, -1.0]), -1.0, 3, "u")
    with pytest.raises(InvariantError):
        RadialProfile(np.array([1.0, 0.5]), np.array([1.0, 1.0]), -1.0, 3, "u")
    profile = RadialProfile(np.array([1.0, 2.0]), np.array([2.0, 1.0]), -1.0, 3, "u")
    assert float(profile.evaluate(4.0)) == pytest.approx(0.5)
    assert list(profile.to_frame().columns) == ["r", "value", "label"]


def test_kappa_sigma_candidate_off_center(unit_ball):
    # лебегова мера инвариантна относительно сдвигов внутри B(0,1)
    concentric = kappa_lower_bound(unit_ball, ((0.0, 0.0, 0.0), 0.25), 2.0, 0.5, [(0.0, 0.0, 0.0)])
    shifted = kappa_lower_bound(unit_ball, ((0.5, 0.0, 0.0), 0.25), 2.0, 0.5, [(0.5, 0.0, 0.0)])
    expected = dict(concentric.candidates)["sigma_B itself"]
    assert dict(shifted.candidates)["sigma_B itself"] == pytest.approx(expected, rel=0.15)
    assert shifted.lower_bound >= dict(shifted.candidates)["sigma_B itself"]
