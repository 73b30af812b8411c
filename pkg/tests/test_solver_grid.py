import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracstar import solver_grid as sg
from fracstar.conditions import make_allen_cahn, zero_nonlinearity
from fracstar.fracop import frac_laplacian_point, gaussian
from fracstar.geometry import Ball, RingDomain
from fracstar.kernels import FracParams, interval_green, interval_green_mass
from fracstar.solver_grid import (AssemblyError, LinearData, NonConvergenceError, NonlinearData, ProblemSpec,
                                  assemble, green_column, maximum_principle_check, solve, solve_linear,
                                  solve_nonlinear_picard, unit_weights)

INTERVAL = RingDomain(Ball((0.0,), 1.0))
ANNULUS = RingDomain(Ball((0.0, 0.0), 1.0), Ball((0.0, 0.0), 0.3))


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
def test_weights_positive_and_summable(dim, a):
    W, S = unit_weights(dim, a, 12 if dim == 2 else 60)
    c = (W.shape[0] - 1) // 2
    assert W[(c,) * dim] == 0.0
    mask = np.ones_like(W, bool)
    mask[(c,) * dim] = False
    assert np.all(W[mask] > 0)
    assert W.sum() < S
    # symmetric under reflection
    assert np.allclose(W, W[::-1], rtol=1e-12)


@settings(max_examples=10)
@given(st.sampled_from([0.5, 1.0, 1.5]), st.sampled_from([1 / 8, 1 / 16]))
def test_m_matrix_structure(a, h):
    op = assemble(ANNULUS, FracParams(a, 2), h)
    A = op.dense()
    off = A - np.diag(np.diag(A))
    assert np.all(np.diag(A) > 0)
    assert np.all(off <= 0)
    assert np.allclose(A, A.T, rtol=1e-12, atol=0)
    assert np.all(A.sum(axis=1) > 0)


@pytest.mark.parametrize("a", [0.5, 1.3])
def test_constants_are_harmonic(a):
    op = assemble(ANNULUS, FracParams(a, 2), 1 / 8)
    lu = op.apply_full(np.full(op.grid.size, 2.5), far_value=2.5)
    assert np.max(np.abs(lu)) < 1e-9 * op.scale


def test_matvec_matches_dense():
    op = assemble(ANNULUS, FracParams(1.2, 2), 1 / 8)
    v = np.random.default_rng(0).normal(size=op.n_unknowns)
    assert np.allclose(op.matvec(v), op.dense() @ v, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("a", [0.6, 1.0, 1.6])
def test_gaussian_consistency_1d(a):
    p = FracParams(a, 1)
    ring = RingDomain(Ball((0.0,), 12.0))
    errs = []
    for h in (1 / 16, 1 / 32):
        op = assemble(ring, p, h)
        vals = np.exp(-op.points()[:, 0] ** 2)
        lu = op.apply_full(vals, 0.0)
        k = int(np.argmin(np.abs(op.interior_points()[:, 0])))
        errs.append(abs(lu[k] - frac_laplacian_point(gaussian(1), [0.0], p)))
    assert errs[1] < 0.05
    assert errs[1] < errs[0]


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
def test_torsion_matches_green_mass(a):
    p = FracParams(a, 1)
    op, out = solve(ProblemSpec(INTERVAL, p, LinearData(g=1.0)), 1 / 256)
    assert out.converged
    for x in (0.0, 0.5):
        assert out.field([[x]])[0] == pytest.approx(interval_green_mass(x, p), rel=0.03)


def test_green_column_1d():
    p = FracParams(1.5, 1)
    op = assemble(INTERVAL, p, 1 / 256)
    G = green_column(op, [0.25])
    for x in (-0.5, 0.0, 0.75):
        assert G([[x]])[0] == pytest.approx(interval_green(x, 0.25, p), rel=0.03)
    assert G([[1.5]])[0] == 0.0


def test_maximum_principle():
    op = assemble(ANNULUS, FracParams(1.0, 2), 1 / 16)
    out = solve_linear(op, g=0.0, h=sg.exterior_rule(ANNULUS, lambda x: np.zeros(len(x)),
                                                     lambda x: np.ones(len(x))))
    assert maximum_principle_check(out.field, op, h=lambda x: np.ones(len(x)))
    v = out.field.values.reshape(-1)[op.interior]
    assert np.all((v > 0) & (v < 1))


def test_cg_path_matches_dense(monkeypatch):
    prob = ProblemSpec(ANNULUS, FracParams(1.0, 2), LinearData(g=1.0))
    _, dense = solve(prob, 1 / 8)
    monkeypatch.setattr(sg, "DENSE_LIMIT", 0)
    _, it = solve(prob, 1 / 8)
    assert it.iterations > 1
    assert np.allclose(dense.field.values, it.field.values, atol=1e-10)


def test_picard_zero_equals_linear():
    p = FracParams(1.0, 2)
    op = assemble(ANNULUS, p, 1 / 16)
    pic = solve_nonlinear_picard(op, zero_nonlinearity(), 0.0, 1.0)
    lin = solve_linear(op, h=sg.exterior_rule(ANNULUS, lambda x: np.zeros(len(x)), lambda x: np.ones(len(x))))
    assert pic.converged
    assert np.allclose(pic.field.values, lin.field.values, atol=1e-10)


def test_picard_allen_cahn_converges_and_stays_in_range():
    op = assemble(ANNULUS, FracParams(1.0, 2), 1 / 16)
    out = solve_nonlinear_picard(op, make_allen_cahn(1.0, 1.0, 2.0).spec)
    assert out.converged and out.residual < 1e-6
    v = out.field.values
    assert v.min() >= -1e-12 and v.max() <= 1 + 1e-12
    assert out.history[-1] < 1e-10


def test_picard_nonconvergence():
    op = assemble(ANNULUS, FracParams(1.0, 2), 1 / 16)
    f = make_allen_cahn(1.0, 1.0, 2.0).spec
    out = solve_nonlinear_picard(op, f, max_iter=1)
    assert not out.converged
    with pytest.raises(NonConvergenceError) as exc:
        solve_nonlinear_picard(op, f, max_iter=1, raise_on_failure=True)
    assert exc.value.outcome.iterations == 1


def test_solve_linear_rejects_positive_q():
    op = assemble(INTERVAL, FracParams(1.0, 1), 1 / 32)
    with pytest.raises(ValueError):
        solve_linear(op, q=1.0)


def test_schrodinger_potential_lowers_solution():
    p = FracParams(1.5, 2)
    op = assemble(ANNULUS, p, 1 / 16)
    h = sg.exterior_rule(ANNULUS, lambda x: np.zeros(len(x)), lambda x: np.ones(len(x)))
    plain = solve_linear(op, h=h)
    damped = solve_linear(op, q=lambda x: -np.sum(x ** 2, axis=1), h=h)
    i = op.interior
    assert np.all(damped.field.values.reshape(-1)[i] <= plain.field.values.reshape(-1)[i] + 1e-12)


def test_assembly_errors():
    with pytest.raises(AssemblyError):
        assemble(ANNULUS, FracParams(1.0, 1), 1 / 8)
    with pytest.raises(AssemblyError):
        assemble(RingDomain(Ball((0.0, 0.0), 1.0), Ball((0.0, 0.0), 0.9)), FracParams(1.0, 2), 1 / 16)


def test_summary_is_plain():
    _, out = solve(ProblemSpec(INTERVAL, FracParams(1.0, 1), LinearData(g=1.0)), 1 / 32)
    s = out.summary()
    assert set(s) == {"residual", "iterations", "converged", "history", "n_nodes"}
