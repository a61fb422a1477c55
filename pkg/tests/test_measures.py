import math

import numpy as np
import pytest

from conftest import MEASURES_DIR
from wolff_toolkit.src.measures.grid import GridMeasure, grid_size
from wolff_toolkit.src.measures.measure_core import (
    ball_mass,
    grid_from_radial,
    load_measure,
    parse_measure_spec,
    restrict_to_ball,
    restrict_to_wolff_sublevel,
    scale,
)
from wolff_toolkit.src.measures.operator import OperatorSpec
from wolff_toolkit.src.measures.radial import RadialMeasure
from wolff_toolkit.src.utils.errors import DomainError, InvariantError, MeasureParseError

BALL_VOLUME = 4.0 * math.pi / 3.0


def test_parse_unit_ball_document():
    text = 'kind = "radial"\nn = 3\nknots = "1, 4.18879"\ntail = "4.18879, 0, 0"\n'
    m = parse_measure_spec(text)
    assert isinstance(m, RadialMeasure)
    assert m.n == 3
    assert m.total_mass() == pytest.approx(4.18879)


def test_parse_zero_measure():
    m = parse_measure_spec('kind = "radial"\nn = 3\nknots = "1, 0"\ntail = "0, 0, 0"\n')
    assert m.is_zero
    assert ball_mass(m, 2.0) == 0.0


def test_parse_knots_as_array():
    text = 'kind = "radial"\nn = 3\nknots = [[0.5, 0.5], [1.0, 1.0]]\ntail = [1.0, 0.0, 0.0]\n'
    m = parse_measure_spec(text)
    assert float(m.mass(0.75)) == pytest.approx(0.75)


def test_grid_zero_document_from_config():
    m = load_measure(MEASURES_DIR / "zero_grid_n2.toml")
    assert isinstance(m, GridMeasure)
    assert m.N == 9
    assert m.total_mass() == 0.0


def test_parse_errors_name_the_key():
    with pytest.raises(MeasureParseError) as exc:
        parse_measure_spec('kind = "sphere"\nn = 3\n')
    assert exc.value.key == "kind"

    with pytest.raises(MeasureParseError) as exc:
        parse_measure_spec('kind = "radial"\nn = 3\nknots = "1, x"\ntail = "1, 0, 0"\n')
    assert exc.value.key == "knots"

    with pytest.raises(MeasureParseError) as exc:
        parse_measure_spec('kind = "radial"\nn = 3\nknots = "1, 1"\n')
    assert exc.value.key == "tail"


def test_decreasing_mass_is_rejected():
    with pytest.raises(InvariantError):
        parse_measure_spec('kind = "radial"\nn = 3\nknots = "1, 2; 2, 1"\ntail = "1, 0, 0"\n')


def test_tail_mismatch_is_rejected():
    with pytest.raises(InvariantError):
        RadialMeasure(knots=((1.0, 1.0),), tail=(2.0, 0.0, 0.0), n=3)


def test_negative_density_is_rejected(tmp_path):
    (tmp_path / "d.csv").write_text("0,0,0\n0,-1,0\n0,0,0\n")
    doc = tmp_path / "m.toml"
    doc.write_text('kind = "grid"\nn = 2\nspacing = 0.5\nbox_half_width = 0.5\ndensity_file = "d.csv"\n')
    with pytest.raises(InvariantError):
        load_measure(doc)


def test_ball_mass_radial_scaling(unit_ball):
    assert ball_mass(unit_ball, 0.5) == pytest.approx(BALL_VOLUME * 0.125, rel=1e-12)
    radii = np.geomspace(1e-3, 10.0, 50)
    masses = unit_ball.mass(radii)
    assert np.all(np.diff(masses) >= 0)


def test_power_law_interpolation_between_knots():
    m = RadialMeasure(knots=((1.0, 1.0), (2.0, 8.0)), tail=(8.0, 0.0, 0.0), n=3)
    # log-linear between the knots: M(r) = r^3
    assert float(m.mass(1.5)) == pytest.approx(1.5**3, rel=1e-12)


def test_grid_ball_mass_and_box_check():
    m = GridMeasure(np.ones((5, 5)), 0.5, 2, 1.0)
    # nodes within distance 0.5 of the origin: the center and its 4 neighbours
    assert m.ball_mass(0.5) == pytest.approx(5 * 0.25)
    with pytest.raises(DomainError):
        m.ball_mass(2.0)


def test_grid_refined_keeps_mass_and_support():
    g = GridMeasure.zeros(2, 0.5, 1.0)
    m = g.with_density(np.where(g.distance_from() <= 0.5, 1.0, 0.0))
    fine = m.refined()
    assert fine.h == 0.25 and fine.N == 9 and fine.L == 1.0
    assert fine.total_mass() == pytest.approx(m.total_mass())
    # новые узлы берут плотность у соседа дальше от начала координат
    assert np.all(fine.density[fine.distance_from() > 0.5 + 1e-12] == 0.0)
    assert fine.density[4, 4] > 0.0
    assert GridMeasure.zeros(3, 0.5, 1.0).refined().is_zero


def test_grid_size_requires_aligned_box():
    assert grid_size(1.0, 0.25) == 9
    with pytest.raises(DomainError):
        grid_size(1.0, 0.3)


def test_restrict_to_ball(unit_ball):
    r = restrict_to_ball(unit_ball, 0.5)
    expected = BALL_VOLUME * 0.125
    for rho in (0.5, 0.9, 5.0, 1e6):
        assert float(r.mass(rho)) == pytest.approx(expected, rel=1e-12)
    assert float(r.mass(0.25)) == pytest.approx(float(unit_ball.mass(0.25)), rel=1e-12)
    assert restrict_to_ball(unit_ball, math.inf) is unit_ball


def test_restrict_zero_stays_zero(zero_radial):
    assert restrict_to_ball(zero_radial, 3.0).is_zero


def test_scale(unit_ball, zero_radial):
    doubled = scale(unit_ball, 2.0)
    radii = np.array([0.1, 0.5, 1.0, 3.0])
    np.testing.assert_allclose(doubled.mass(radii), 2.0 * unit_ball.mass(radii), rtol=1e-15)
    assert scale(unit_ball, 1.0) is unit_ball
    assert scale(zero_radial, 7.0).is_zero
    with pytest.raises(DomainError):
        scale(unit_ball, 0.0)
    with pytest.raises(DomainError):
        scale(unit_ball, -1.0)


def test_wolff_sublevel_above_max_is_the_ball(unit_ball):
    # max W = W(0) = 2π < 10
    r = restrict_to_wolff_sublevel(unit_ball, 10.0, 2.0, 3)
    b = restrict_to_ball(unit_ball, 10.0)
    radii = np.geomspace(1e-3, 20.0, 40)
    np.testing.assert_allclose(r.mass(radii), b.mass(radii), rtol=1e-14)


def test_wolff_sublevel_small_k_is_empty(unit_ball, zero_radial):
    # W ≥ 4π/(3·0.1) > 0.1 on B(0, 0.1)
    assert restrict_to_wolff_sublevel(unit_ball, 0.1, 2.0, 3).total_mass() == 0.0
    assert restrict_to_wolff_sublevel(zero_radial, 1.0, 2.0, 3).is_zero


def test_wolff_sublevel_cuts_a_core(unit_mass_ball):
    # n=3, p=2: W is the Newtonian potential, (3 − r²)/2 inside the unit-mass ball
    r = restrict_to_wolff_sublevel(unit_mass_ball, 1.2, 2.0, 3)
    core = math.sqrt(0.6)
    assert r.support[0][0] == pytest.approx(core, abs=1e-7)
    assert r.total_mass() == pytest.approx(1.0 - core**3, rel=1e-6)


def test_grid_from_radial_preserves_mass(unit_mass_ball):
    g = grid_from_radial(unit_mass_ball, 2.0, 0.25)
    assert g.total_mass() == pytest.approx(1.0, rel=1e-12)
    assert np.all(g.density[g.distance_from() > 1.0 + 1e-9] == 0.0)


def test_operator_structure_checks():
    assert all(OperatorSpec(2.5, 3).check_structure().values())
    w = np.full((5, 5), 1.5)
    op = OperatorSpec(1.5, 2, weight=w, alpha=1.0, beta=2.0)
    assert all(op.check_structure().values())
    with pytest.raises(InvariantError):
        OperatorSpec(1.5, 2, weight=w, alpha=1.0, beta=1.2)
    with pytest.raises(DomainError):
        OperatorSpec(3.0, 3)
