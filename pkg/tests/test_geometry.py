import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracstar.geometry import (EXTERIOR, INNER, INTERIOR, Ball, Grid, RadialGraph, RingDomain, ScalarField,
                               WholeSpace, count_crossings, is_starshaped_set, level_star_check,
                               ray_monotonicity, superlevel_set, uniform_star_margin, ut_field)

coords = st.floats(-3.0, 3.0)


def flower(amp=0.2, k=5):
    return RadialGraph.from_function(lambda th: 1.5 + amp * np.cos(k * th), n=512)


def test_ball_contains_and_distance():
    b = Ball((0.0, 0.0), 2.0)
    assert b.contains([[1.0, 1.0], [2.0, 0.0]]).tolist() == [True, False]
    assert b.contains([[2.0, 0.0]], closed=True).tolist() == [True]
    assert b.boundary_distance([[0.5, 0.0]])[0] == pytest.approx(1.5)
    with pytest.raises(ValueError):
        Ball((0.0,), -1.0)


@given(coords, coords)
def test_radial_graph_of_constant_is_ball(x, y):
    g = RadialGraph.from_function(lambda th: np.full_like(th, 1.7), n=64)
    b = Ball((0.0, 0.0), 1.7)
    r = math.hypot(x, y)
    if abs(r - 1.7) < 1e-9:
        return
    assert g.contains([[x, y]])[0] == b.contains([[x, y]])[0]


def test_radial_graph_spline_tracks_function():
    g = flower()
    th = np.linspace(0, 2 * np.pi, 97)
    assert np.max(np.abs(g.rho(th) - (1.5 + 0.2 * np.cos(5 * th)))) < 1e-8
    assert np.max(np.abs(g.drho(th) + np.sin(5 * th))) < 1e-5
    lin = RadialGraph((0.0, 0.0), [1.0, 2.0, 1.0, 2.0], interpolation="linear")
    with pytest.raises(ValueError):
        lin.drho(0.0)


def test_radial_graph_validation():
    with pytest.raises(ValueError):
        RadialGraph((0.0,), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        RadialGraph((0.0, 0.0), [1.0, -1.0, 1.0])
    with pytest.raises(ValueError):
        RadialGraph((0.0, 0.0), [1.0, 1.0], interpolation="cubic")


def test_interval_graph():
    d = RadialGraph((0.5,), [1.0, 2.0])
    assert d.contains([[-0.49], [2.49], [2.6], [-0.6]]).tolist() == [True, True, False, False]
    assert uniform_star_margin(d) == pytest.approx(0.5)


def test_ring_classify():
    ring = RingDomain(Ball((0.0, 0.0), 2.0), Ball((0.0, 0.0), 0.5))
    codes = ring.classify([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [2.5, 0.0]])
    assert codes.tolist() == [INNER, INNER, INTERIOR, EXTERIOR]
    assert ring.gap() == pytest.approx(1.5)
    assert ring.boundary_distance([[1.0, 0.0]])[0] == pytest.approx(0.5)


def test_ring_rejects_bad_nesting():
    with pytest.raises(ValueError):
        RingDomain(Ball((0.0, 0.0), 1.0), Ball((0.0, 0.0), 1.5))
    with pytest.raises(ValueError):
        RingDomain(Ball((0.0, 0.0), 3.0), Ball((1.0, 0.0), 0.5))
    with pytest.raises(ValueError):
        RingDomain(Ball((0.0,), 1.0), Ball((0.0, 0.0), 0.5))


def test_whole_space_ring():
    ring = RingDomain(WholeSpace(1, 5.0), Ball((0.0,), 1.0))
    assert ring.classify([[0.0], [3.0], [100.0]]).tolist() == [INNER, INTERIOR, INTERIOR]
    assert ring.bounding_box()[1][0] == 5.0


def test_starshaped_checks():
    assert is_starshaped_set(flower())[0]
    assert is_starshaped_set(Ball((0.2, 0.1), 1.0))[0]
    assert uniform_star_margin(Ball((0.3, 0.4), 2.0)) == pytest.approx(1.5)
    # about its own centre a radial graph has <x, nu> = r^2 / sqrt(r^2 + r'^2)
    th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    r, dr = 1.5 + 0.6 * np.cos(8 * th), -4.8 * np.sin(8 * th)
    assert uniform_star_margin(flower(amp=0.6, k=8)) == pytest.approx(np.min(r ** 2 / np.hypot(r, dr)), rel=1e-3)
    assert uniform_star_margin(Ball((1.5, 0.0), 1.0)) == pytest.approx(-0.5)
    assert uniform_star_margin(flower()) > 0


def test_grid_covering_contains_box():
    g = Grid.covering([-1.0, -0.3], [1.0, 0.7], 0.25)
    ax = g.axes()
    assert ax[0][0] <= -1.0 and ax[0][-1] >= 1.0
    assert ax[1][0] <= -0.3 and ax[1][-1] >= 0.7
    assert np.allclose(np.mod(ax[1] / 0.25 + 1e-9, 1.0), 0.0, atol=1e-6)


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_field_interpolates_linear_exactly(x, y):
    g = Grid.covering([-1, -1], [1, 1], 0.125)
    pts = g.points()
    f = ScalarField(g, 2 * pts[:, 0] - pts[:, 1] + 0.5)
    assert f([[x, y]])[0] == pytest.approx(2 * x - y + 0.5, abs=1e-12)


def test_field_exterior_rule_and_interior_mask():
    g = Grid.covering([-1], [1], 0.5)
    f = ScalarField(g, np.ones(g.size), exterior_rule=lambda q: np.full(len(q), -3.0),
                    interior=lambda q: q[:, 0] > 0)
    assert f([[0.5], [-0.5], [4.0]]).tolist() == [1.0, -3.0, -3.0]
    bare = ScalarField(g, np.ones(g.size))
    with pytest.raises(ValueError):
        bare([[5.0]])
    with pytest.raises(ValueError):
        ScalarField(g, np.full(g.size, np.nan))


def test_csv_round_trip(tmp_path):
    g = Grid.covering([-1, -0.5], [1, 0.5], 0.25)
    vals = np.random.default_rng(3).normal(size=g.size)
    f = ScalarField(g, vals)
    path = tmp_path / "f.csv"
    f.to_csv(path)
    back = ScalarField.from_csv(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    assert ScalarField.from_csv(f.to_csv()).grid == g


def _radial_field(profile, h=0.05, R=2.0):
    g = Grid.covering([-R, -R], [R, R], h)
    r = np.linalg.norm(g.points(), axis=1)
    return ScalarField(g, profile(r), exterior_rule=lambda q: profile(np.linalg.norm(q, axis=1)))


def test_ray_monotonicity_on_decreasing_profile():
    f = _radial_field(lambda r: np.exp(-r ** 2))
    rep = ray_monotonicity(f, n_rays=16)
    assert rep.passed and rep.witness is None
    assert rep.worst_violation > -1e-12


def test_ray_monotonicity_detects_bump():
    f = _radial_field(lambda r: np.exp(-(r - 1.0) ** 2 * 4))
    rep = ray_monotonicity(f, n_rays=8)
    assert not rep.passed
    assert rep.witness["u_tx"] > rep.witness["u_x"]


def test_level_sets_and_crossings():
    f = _radial_field(lambda r: np.exp(-r ** 2))
    v = level_star_check(f, 0.5)
    assert v.passed and v.n_nodes == int(superlevel_set(f, 0.5).sum())
    assert np.all(count_crossings(f, 0.5, n_rays=8, r_max=1.9) == 1)
    ring_profile = _radial_field(lambda r: np.exp(-(r - 1.0) ** 2 * 4))
    assert not level_star_check(ring_profile, 0.5).passed
    assert np.all(count_crossings(ring_profile, 0.5, n_rays=8, r_max=1.9) == 2)


def test_ut_field_sign():
    f = _radial_field(lambda r: np.exp(-r ** 2))
    u2 = ut_field(f, 1.5)
    assert np.min(u2.values) > -1e-12
    with pytest.raises(ValueError):
        ut_field(f, 1.0)
