import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from fracstar.kernels import (FracParams, KernelKind, ball_green, diagonal_green, exit_time_constant,
                              expected_exit_time_ball, frac_constant, green_integral, interval_green,
                              interval_green_closed_alpha1, interval_green_dx, interval_green_mass, kernel,
                              riesz_constant, sphere_area)

alphas = st.floats(0.05, 1.95)
inside = st.floats(-0.95, 0.95)


def test_params_validation():
    with pytest.raises(ValueError):
        FracParams(0.0, 1)
    with pytest.raises(ValueError):
        FracParams(2.0, 1)
    with pytest.raises(ValueError):
        FracParams(1.0, 0)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_frac_constant_alt_form(dim):
    # alpha 2^{alpha-1} Gamma((N+alpha)/2) / (pi^{N/2} Gamma(1 - alpha/2))
    for a in (0.3, 1.0, 1.7):
        alt = a * 2 ** (a - 1) * gamma((dim + a) / 2) / (math.pi ** (dim / 2) * gamma(1 - a / 2))
        assert frac_constant(FracParams(a, dim)) == pytest.approx(alt, rel=1e-13)


def test_known_constants():
    assert frac_constant(FracParams(1.0, 1)) == pytest.approx(1 / math.pi, rel=1e-14)
    assert frac_constant(FracParams(1.0, 2)) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    assert riesz_constant(FracParams(1.0, 2)) == pytest.approx(1 / (2 * math.pi), rel=1e-14)
    assert sphere_area(1) == 2.0
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_riesz_needs_dim_above_alpha():
    with pytest.raises(ValueError):
        riesz_constant(FracParams(1.0, 1))
    with pytest.raises(ValueError):
        riesz_constant(FracParams(1.5, 1))


def test_kernel_kinds():
    assert FracParams(0.5, 1).kind is KernelKind.RIESZ
    assert FracParams(1.5, 1).kind is KernelKind.COMPENSATED_SUB
    assert FracParams(1.0, 1).kind is KernelKind.COMPENSATED_LOG
    assert FracParams(1.5, 2).kind is KernelKind.RIESZ
    assert kernel(FracParams(1.0, 1), [math.e]) == pytest.approx(-1 / math.pi)
    a = 1.5
    assert kernel(FracParams(a, 1), [2.0]) == pytest.approx(
        2 ** (a - 1) / (2 * gamma(a) * math.cos(math.pi * a / 2)))
    with pytest.raises(ZeroDivisionError):
        kernel(FracParams(0.5, 1), [0.0])


def test_green_alpha1_closed_form_value():
    # exact value of the closed form; a 5-digit literal 0.41918 is off by 2e-5
    g = interval_green(0.0, 0.5, FracParams(1.0, 1))
    assert g == pytest.approx(interval_green_closed_alpha1(0.0, 0.5), abs=1e-12)
    assert g == pytest.approx(0.4192007182789827, abs=1e-12)


@given(inside, inside)
def test_green_alpha1_matches_closed_form(x, y):
    if abs(x - y) < 1e-6:
        return
    g = interval_green(x, y, FracParams(1.0, 1))
    assert g == pytest.approx(interval_green_closed_alpha1(x, y), rel=1e-11, abs=1e-13)


@given(inside, inside, alphas)
def test_green_symmetric_positive(x, y, a):
    if abs(x - y) < 1e-6:
        return
    p = FracParams(a, 1)
    g1, g2 = interval_green(x, y, p), interval_green(y, x, p)
    assert g1 > 0
    assert g1 == pytest.approx(g2, rel=1e-12)


def test_green_integral_limits():
    a = 0.6
    # tail beyond w is about w^{(a-1)/2} / ((1-a)/2)
    w = 1e25
    big = green_integral(w, a)
    tail = w ** ((a - 1) / 2) / ((1 - a) / 2)
    assert big + tail == pytest.approx(green_integral(math.inf, a), rel=1e-6)
    assert green_integral(math.inf, 1.2) == math.inf
    assert green_integral(0.0, 1.0) == 0.0
    # alpha = 1: int_0^w r^{-1/2}(1+r)^{-1/2} dr = 2 asinh(sqrt(w))
    assert green_integral(3.0, 1.0) == pytest.approx(2 * math.asinh(math.sqrt(3.0)), rel=1e-12)


@pytest.mark.parametrize("a", [1.2, 1.5, 1.9])
def test_diagonal_is_limit(a):
    p = FracParams(a, 1)
    x = 0.2
    d = diagonal_green(x, a)
    gaps = [d - interval_green(x, x + e, p) for e in (1e-5, 1e-7, 1e-9)]
    # the gap closes like |x - y|^{a-1}
    assert all(g > 0 for g in gaps)
    assert gaps[0] / gaps[1] == pytest.approx(100 ** (a - 1), rel=0.05)
    assert gaps[1] / gaps[2] == pytest.approx(100 ** (a - 1), rel=0.05)
    assert diagonal_green(x, 0.8) == math.inf


@given(inside, inside, st.sampled_from([0.5, 1.0, 1.5]))
def test_green_dx_matches_finite_difference(x, y, a):
    if abs(x - y) < 0.05:
        return
    p = FracParams(a, 1)
    s = 1e-5
    fd = (interval_green(x + s, y, p) - interval_green(x - s, y, p)) / (2 * s)
    assert interval_green_dx(x, y, p) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_green_dx_singular_on_diagonal():
    with pytest.raises(ZeroDivisionError):
        interval_green_dx(0.1, 0.1, FracParams(1.0, 1))


def test_points_must_be_inside():
    with pytest.raises(ValueError):
        interval_green(1.0, 0.0, FracParams(1.0, 1))
    with pytest.raises(ValueError):
        interval_green(0.0, 0.0, FracParams(1.0, 2))


@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9), st.floats(0.1, 3.0), st.floats(-2, 2))
def test_ball_green_rescaling(xs, ys, r, c):
    if abs(xs - ys) < 1e-3:
        return
    p = FracParams(1.3, 1)
    g = ball_green(c + r * xs, c + r * ys, p, c, r)
    assert g == pytest.approx(r ** 0.3 * interval_green(xs, ys, p), rel=1e-10)
    assert ball_green(c + 1.5 * r, c, p, c, r) == 0.0


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("x", [0.0, 0.4, -0.7])
def test_exit_time_equals_green_mass(a, x):
    p = FracParams(a, 1)
    assert interval_green_mass(x, p) == pytest.approx(expected_exit_time_ball([x], [0.0], 1.0, p), rel=1e-6)


def test_exit_time_constant_alpha1_is_one():
    assert exit_time_constant(FracParams(1.0, 1)) == pytest.approx(1.0, rel=1e-14)


def test_expected_exit_time_outside_raises():
    with pytest.raises(ValueError):
        expected_exit_time_ball([2.0], [0.0], 1.0, FracParams(1.0, 1))
