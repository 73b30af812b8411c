"""Sampled checkers for the structural conditions on nonlinearities f(x, u).

Conditions are inequalities over (x, u, t) in ring x [0, 1] x [1, t_max]; each
checker reports the worst margin over an unscrambled Sobol sample so that a
given plan always yields the same report. Sampling can refute a condition, not
prove it; a pass means no counterexample among the samples.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

CONDITIONS = ("F0", "F1", "F2", "F3", "F4", "F5", "F6")


@dataclass(frozen=True)
class NonlinearitySpec:
    """f: (points (m, N), u (m,)) -> (m,)."""

    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    declared_lipschitz: Optional[float] = None
    label: str = "f"
    params: dict = field(default_factory=dict)

    def __call__(self, x, u) -> np.ndarray:
        x = np.asarray(x, float)
        u = np.broadcast_to(np.asarray(u, float), (len(x),))
        return np.asarray(self.eval(x, u), float).reshape(-1)


@dataclass
class ConditionReport:
    condition: str
    passed: bool
    worst_margin: float
    witness: Optional[dict] = None
    n_samples: int = 0
    estimate: Optional[float] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        from .reports import jsonable
        return jsonable(self)


@dataclass(frozen=True)
class SamplePlan:
    n_samples: int = 10_000
    t_max: float = 4.0
    seed: int = 0
    box_radius: Optional[float] = None
    tol: float = 1e-12
    t_min: float = 1.0


def _sobol(dim: int, n: int, seed: int) -> np.ndarray:
    m = int(math.ceil(math.log2(max(n, 2))))
    pts = qmc.Sobol(dim, scramble=False, seed=seed).random_base2(m)
    # skip the corner point (all zeros) that unscrambled Sobol starts with
    return pts[1:n + 1] if len(pts) > n else pts[:n]


def _ring_box(ring, plan: SamplePlan):
    lo, hi = ring.bounding_box()
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    notes = []
    if not np.all(np.isfinite(lo)) or (plan.box_radius is not None
                                       and np.max(np.abs(np.r_[lo, hi])) > plan.box_radius):
        r = plan.box_radius or 8.0
        lo, hi = np.maximum(lo, -r), np.minimum(hi, r)
        notes.append(f"admissible set truncated to the box [-{r}, {r}]^N")
    return lo, hi, notes


def sample_ring(ring, plan: SamplePlan, extra: int = 0):
    """Quasi-random points of the ring plus ``extra`` unit-interval coordinates each."""
    dim = ring.dim
    lo, hi, notes = _ring_box(ring, plan)
    raw = _sobol(dim + extra, 4 * plan.n_samples, plan.seed)
    x = lo + raw[:, :dim] * (hi - lo)
    keep = ring.contains(x)
    x, rest = x[keep][:plan.n_samples], raw[keep][:plan.n_samples, dim:]
    return x, rest, notes


def _fail(condition, margins, wit_fn, n, tol, **kw) -> ConditionReport:
    if len(margins) == 0:
        notes = list(kw.pop("notes", [])) + ["empty admissible sample set"]
        return ConditionReport(condition, False, math.nan, None, 0, notes=notes, **kw)
    k = int(np.argmin(margins))
    worst = float(margins[k])
    ok = worst >= -tol
    return ConditionReport(condition, ok, worst, None if ok else wit_fn(k), n, **kw)


def _radial_grad(f: NonlinearitySpec, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """<x, grad_x f(x, u)> by central differences with step 1e-5 (1 + |x|)."""
    step = 1e-5 * (1.0 + np.linalg.norm(x, axis=1))
    out = np.zeros(len(x))
    for k in range(x.shape[1]):
        e = np.zeros_like(x)
        e[:, k] = step
        out += x[:, k] * (f(x + e, u) - f(x - e, u)) / (2.0 * step)
    return out


def check_condition(f: NonlinearitySpec, ring, which: str, plan: SamplePlan = SamplePlan(),
                    alpha: float = 1.0) -> ConditionReport:
    """Worst sampled margin of condition ``which`` for f over the ring.

    F1 requires the operator order ``alpha``. F2 reports the Lipschitz estimate
    in ``estimate`` and passes iff it does not exceed the declared constant.
    """
    if which not in CONDITIONS:
        raise ValueError(f"unknown condition {which!r}")
    tol = plan.tol
    if which == "F1":
        x, r, notes = sample_ring(ring, plan, extra=2)
        u = r[:, 0]
        t = plan.t_min + r[:, 1] * (plan.t_max - plan.t_min)
        ok = ring.contains(t[:, None] * x)
        x, u, t = x[ok], u[ok], t[ok]
        m = t ** alpha * f(t[:, None] * x, u) - f(x, u)
        rep = _fail("F1", m, lambda k: {"x": x[k].tolist(), "u": float(u[k]), "t": float(t[k])},
                    len(m), tol, notes=notes)
        return rep
    if which == "F2":
        x, r, notes = sample_ring(ring, plan, extra=2)
        u1, u2 = r[:, 0], r[:, 1]
        sep = np.abs(u1 - u2) > 1e-9
        x, u1, u2 = x[sep], u1[sep], u2[sep]
        q = np.abs(f(x, u1) - f(x, u2)) / np.abs(u1 - u2)
        est = float(np.max(q)) if len(q) else math.nan
        k = int(np.argmax(q)) if len(q) else 0
        decl = f.declared_lipschitz
        if decl is None:
            notes.append("no declared Lipschitz constant; estimate only")
            return ConditionReport("F2", math.isfinite(est), 0.0, None, len(q), est, notes)
        margin = decl + 1e-9 - est
        wit = None if margin >= 0 else {"x": x[k].tolist(), "u1": float(u1[k]), "u2": float(u2[k])}
        return ConditionReport("F2", margin >= 0, margin, wit, len(q), est, notes)
    if which == "F3":
        x, r, notes = sample_ring(ring, plan, extra=2)
        lo, hi = np.minimum(r[:, 0], r[:, 1]), np.maximum(r[:, 0], r[:, 1])
        m = f(x, hi) - f(x, lo)
        return _fail("F3", m, lambda k: {"x": x[k].tolist(), "u1": float(lo[k]), "u2": float(hi[k])},
                     len(m), tol, notes=notes)
    x, r, notes = sample_ring(ring, plan, extra=1)
    u = r[:, 0]
    if which == "F0":
        vals = np.abs(f(x, u))
        warnings.warn("F0 (boundedness) is only sampled, not proved", stacklevel=2)
        notes.append("boundedness sampled only; a finite maximum is not a proof")
        est = float(np.max(vals))
        return ConditionReport("F0", bool(np.isfinite(est)), 0.0, None, len(vals), est, notes)
    if which == "F4":
        m = -np.abs(f(x, np.zeros_like(u)))
        notes.append("continuity is not checked")
        return _fail("F4", m, lambda k: {"x": x[k].tolist(), "u": 0.0}, len(m), tol, notes=notes)
    if which == "F5":
        m = f(x, u)
        return _fail("F5", m, lambda k: {"x": x[k].tolist(), "u": float(u[k])}, len(m), tol, notes=notes)
    m = _radial_grad(f, x, u)
    # finite differences: allow rounding noise of order step^2 * |f|
    return _fail("F6", m, lambda k: {"x": x[k].tolist(), "u": float(u[k])}, len(m), max(tol, 1e-7),
                 notes=notes)


def verify_remark_f5f6(f: NonlinearitySpec, ring, plan: SamplePlan = SamplePlan(),
                       alpha: float = 1.0) -> ConditionReport:
    """If f >= 0 and <x, grad_x f> >= 0 on the samples, every F1 sample must hold.

    Reports 'precondition not met' (passed=True, no claim) when F5 or F6 fails.
    """
    f5 = check_condition(f, ring, "F5", plan, alpha)
    f6 = check_condition(f, ring, "F6", plan, alpha)
    if not (f5.passed and f6.passed):
        failed = [r.condition for r in (f5, f6) if not r.passed]
        return ConditionReport("F5F6=>F1", True, math.nan, None, f5.n_samples,
                               notes=[f"precondition not met: {', '.join(failed)} fails"])
    f1 = check_condition(f, ring, "F1", plan, alpha)
    rep = ConditionReport("F5F6=>F1", f1.passed, f1.worst_margin, f1.witness, f1.n_samples,
                          notes=["F5 and F6 hold on the samples"] + f1.notes)
    rep.estimate = 0.0 if f1.passed else 1.0
    return rep


def check_schrodinger_q(q: Callable, ring, plan: SamplePlan = SamplePlan()) -> ConditionReport:
    """q >= 0 and q(tx) >= q(x) for t > 1 with x in (outer / t) minus the closed inner domain."""
    x, r, notes = sample_ring(ring, plan, extra=1)
    qx = np.asarray(q(x), float)
    if np.min(qx) < -plan.tol:
        k = int(np.argmin(qx))
        return ConditionReport("q", False, float(qx[k]), {"x": x[k].tolist(), "reason": "q < 0"},
                               len(x), notes=notes)
    t = plan.t_min + r[:, 0] * (plan.t_max - plan.t_min)
    tx = t[:, None] * x
    ok = ring.outer.contains(tx)
    x, t, tx, qx = x[ok], t[ok], tx[ok], qx[ok]
    m = np.asarray(q(tx), float) - qx
    return _fail("q", m, lambda k: {"x": x[k].tolist(), "t": float(t[k])}, len(m), plan.tol, notes=notes)


@dataclass(frozen=True)
class AllenCahn:
    spec: NonlinearitySpec
    case_i: bool
    case_ii: bool


def make_allen_cahn(beta: float, gamma: float, p: float) -> AllenCahn:
    """f(x, u) = beta u - gamma u^p with the two hypothesis flags.

    case_i: beta >= gamma; case_ii: beta >= p gamma.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if p < 1:
        raise ValueError("p must be at least 1")
    spec = NonlinearitySpec(lambda x, u: beta * u - gamma * np.power(u, p),
                            declared_lipschitz=beta + abs(gamma) * p,
                            label=f"allen_cahn(beta={beta}, gamma={gamma}, p={p})",
                            params={"beta": beta, "gamma": gamma, "p": p})
    return AllenCahn(spec, beta >= gamma, beta >= p * gamma)


def zero_nonlinearity() -> NonlinearitySpec:
    return NonlinearitySpec(lambda x, u: np.zeros(len(x)), 0.0, "zero")


def schrodinger(q: Callable, q_bound: Optional[float] = None, label: str = "q(x) u") -> NonlinearitySpec:
    """f(x, u) = q(x) u; Lipschitz constant sup q (when given)."""
    return NonlinearitySpec(lambda x, u: np.asarray(q(x), float) * u, q_bound, label)
