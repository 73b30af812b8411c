import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracstar.conditions import (NonlinearitySpec, SamplePlan, check_condition, check_schrodinger_q,
                                 make_allen_cahn, schrodinger, verify_remark_f5f6, zero_nonlinearity)
from fracstar.geometry import Ball, RingDomain, WholeSpace

RING = RingDomain(Ball((0.0, 0.0), 2.0), Ball((0.0, 0.0), 0.5))
PLAN = SamplePlan(n_samples=2000)


def radial(c):
    return NonlinearitySpec(lambda x, u: c(np.linalg.norm(x, axis=1)) * (1 + u), 2.0, "radial")


def test_zero_passes_everything():
    f = zero_nonlinearity()
    for c in ("F1", "F2", "F3", "F4"):
        assert check_condition(f, RING, c, PLAN).passed


def test_f0_warns():
    with pytest.warns(UserWarning):
        rep = check_condition(zero_nonlinearity(), RING, "F0", PLAN)
    assert rep.passed and rep.estimate == 0.0


def test_f1_increasing_weight_passes_decreasing_fails():
    up = radial(lambda r: r)
    down = radial(lambda r: 1.0 / r ** 3)
    assert check_condition(up, RING, "F1", PLAN, alpha=1.0).passed
    rep = check_condition(down, RING, "F1", PLAN, alpha=1.0)
    assert not rep.passed
    w = rep.witness
    x, t = np.array([w["x"]]), w["t"]
    assert t > 1 and RING.contains(t * x)[0]
    m = t * down(t * x, [w["u"]])[0] - down(x, [w["u"]])[0]
    assert m == pytest.approx(rep.worst_margin)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_f1_borderline_weight(alpha):
    # f = |x|^{-alpha} makes t^alpha f(tx) - f(x) vanish identically
    f = NonlinearitySpec(lambda x, u: np.linalg.norm(x, axis=1) ** -alpha + 0 * u, 0.0)
    rep = check_condition(f, RING, "F1", SamplePlan(n_samples=500, tol=1e-10), alpha)
    assert rep.passed
    assert abs(rep.worst_margin) < 1e-10


def test_f1_empty_admissible_set():
    # with t >= 10 no scaled point of the ring stays inside it
    rep = check_condition(zero_nonlinearity(), RING, "F1", SamplePlan(n_samples=200, t_min=10.0, t_max=20.0))
    assert not rep.passed
    assert rep.n_samples == 0
    assert "empty admissible sample set" in rep.notes


def test_f2_lipschitz_estimate():
    ac = make_allen_cahn(1.0, 1.0, 2.0)
    rep = check_condition(ac.spec, RING, "F2", PLAN)
    assert rep.passed
    # the difference quotient |beta - gamma (u1 + u2)| has supremum 1 on [0, 1]^2
    assert 0.95 <= rep.estimate <= 1.0 + 1e-12
    tight = NonlinearitySpec(ac.spec.eval, 0.5)
    assert not check_condition(tight, RING, "F2", PLAN).passed


def test_f3_monotonicity():
    assert check_condition(make_allen_cahn(2.0, 1.0, 2.0).spec, RING, "F3", PLAN).passed
    rep = check_condition(make_allen_cahn(1.0, 1.0, 2.0).spec, RING, "F3", PLAN)
    assert not rep.passed
    assert rep.witness["u2"] > rep.witness["u1"]


def test_f4_and_f5():
    pos = NonlinearitySpec(lambda x, u: 1.0 + u, 1.0)
    assert not check_condition(pos, RING, "F4", PLAN).passed
    assert check_condition(pos, RING, "F5", PLAN).passed
    assert not check_condition(make_allen_cahn(0.0, 1.0, 2.0).spec, RING, "F5", PLAN).passed


def test_remark_f5f6_implies_f1():
    rep = verify_remark_f5f6(radial(lambda r: r ** 2), RING, PLAN)
    assert rep.passed and rep.condition == "F5F6=>F1"
    pre = verify_remark_f5f6(radial(lambda r: 1 / r), RING, PLAN)
    assert pre.passed and "precondition not met" in pre.notes[0]


@settings(max_examples=15)
@given(st.floats(0.0, 3.0), st.floats(-2.0, 2.0))
def test_remark_holds_for_power_weights(k, c):
    # f = e^c |x|^k (1 + u) has F5, F6 for k >= 0, hence F1
    f = radial(lambda r: np.exp(c) * r ** k)
    assert verify_remark_f5f6(f, RING, SamplePlan(n_samples=300), alpha=1.0).passed


def test_sampling_is_deterministic():
    f = radial(lambda r: 1.0 / r ** 3)
    a = check_condition(f, RING, "F1", PLAN)
    b = check_condition(f, RING, "F1", PLAN)
    assert a.worst_margin == b.worst_margin and a.witness == b.witness


def test_whole_space_box_note():
    ring = RingDomain(WholeSpace(2, 6.0), Ball((0.0, 0.0), 1.0))
    rep = check_condition(zero_nonlinearity(), ring, "F3", SamplePlan(n_samples=200, box_radius=4.0))
    assert any("truncated" in n for n in rep.notes)


def test_schrodinger_q():
    assert check_schrodinger_q(lambda x: np.sum(x ** 2, axis=1), RING, PLAN).passed
    neg = check_schrodinger_q(lambda x: -np.ones(len(x)), RING, PLAN)
    assert not neg.passed and neg.witness["reason"] == "q < 0"
    dec = check_schrodinger_q(lambda x: 1.0 / np.linalg.norm(x, axis=1), RING, PLAN)
    assert not dec.passed
    f = schrodinger(lambda x: np.ones(len(x)), 1.0)
    assert f(np.zeros((3, 2)), 2.0).tolist() == [2.0, 2.0, 2.0]


def test_allen_cahn_flags():
    assert make_allen_cahn(1.0, 1.0, 2.0).case_i
    assert not make_allen_cahn(1.0, 1.0, 2.0).case_ii
    assert make_allen_cahn(2.0, 1.0, 2.0).case_ii
    with pytest.raises(ValueError):
        make_allen_cahn(-1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        make_allen_cahn(1.0, 1.0, 0.5)


def test_unknown_condition():
    with pytest.raises(ValueError):
        check_condition(zero_nonlinearity(), RING, "F9")
