import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from fracstar.fracop import (Evaluable, QuadratureConfig, QuadratureError, check_euler_commutator,
                             check_scaling, frac_laplacian_point, gaussian, scaled, torsion_profile)
from fracstar.kernels import FracParams, exit_time_constant


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
def test_gaussian_at_origin(dim, a):
    # Fourier oracle: value at 0 is 2^a Gamma((N+a)/2) / Gamma(N/2)
    exact = 2 ** a * gamma((dim + a) / 2) / gamma(dim / 2)
    val = frac_laplacian_point(gaussian(dim), np.zeros(dim), FracParams(a, dim))
    assert val == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("x", [0.0, 0.3, -0.45])
def test_torsion_profile_constant(a, x):
    # (1 - x^2)_+^{a/2} divided by its constant image is the mean exit time
    # the boundary cusp slows refinement, so the self-check tolerance is relaxed
    val = frac_laplacian_point(torsion_profile(a), [x], FracParams(a, 1), QuadratureConfig(tol=1e-4))
    assert val == pytest.approx(1.0 / exit_time_constant(FracParams(a, 1)), rel=1e-4)


def test_torsion_profile_2d():
    a = 1.0
    val = frac_laplacian_point(torsion_profile(a, 2), [0.0, 0.0], FracParams(a, 2),
                               QuadratureConfig(tol=1e-3))
    assert val == pytest.approx(1.0 / exit_time_constant(FracParams(a, 2)), rel=1e-3)


@given(st.floats(1.1, 3.0), st.floats(-1.0, 1.0), st.sampled_from([0.5, 1.0, 1.5]))
def test_scaling_identity(t, x, a):
    assert check_scaling(gaussian(1), t, [x], FracParams(a, 1)) < 1e-6


@pytest.mark.parametrize("a", [0.5, 1.2])
def test_euler_commutator(a):
    for x in ([0.3], [-0.8], [1.1]):
        assert check_euler_commutator(gaussian(1), x, FracParams(a, 1)) < 1e-4


def test_scaled_carries_gradient_and_breakpoints():
    u = torsion_profile(1.0)
    v = scaled(u, 2.0)
    assert v.breakpoints == (-0.5, 0.5)
    g = scaled(gaussian(1), 2.0)
    pts = np.array([[0.3]])
    assert g.grad(pts)[0, 0] == pytest.approx(2 * -2 * 0.6 * np.exp(-0.36))


def test_quadrature_error_on_refinement_failure():
    kink = Evaluable(lambda p: np.abs(p[:, 0] - 0.01), 1)
    with pytest.raises(QuadratureError):
        frac_laplacian_point(kink, [0.0], FracParams(1.0, 1), QuadratureConfig(tol=1e-12))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        frac_laplacian_point(gaussian(2), [0.0], FracParams(1.0, 1))


def test_full_output_reports_tail_bound():
    val, info = frac_laplacian_point(gaussian(1), [0.0], FracParams(1.0, 1), full_output=True)
    assert info["tail_bound"] > 0
    assert info["refinement_change"] < 1e-6


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(inner_radius=2.0, outer_radius=1.0)
    with pytest.raises(ValueError):
        QuadratureConfig(points_inner=4)
