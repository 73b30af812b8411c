"""Theorem-level pipelines: hypothesis checks, solve, and geometric verdicts."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import conditions as cond
from .conditions import ConditionReport, NonlinearitySpec, SamplePlan
from .geometry import (DEFAULT_T_GRID, INNER, Ball, LevelVerdict, RadialGraph, RingDomain, ScalarField,
                       StarReport, WholeSpace, count_crossings, is_starshaped_set, level_star_check,
                       ray_monotonicity, uniform_star_margin)
from .kernels import FracParams, ball_green, interval_green_dx
from .solver_grid import (DiscreteOperator, LinearData, NonConvergenceError, NonlinearData, ProblemSpec,
                          SolveOutcome, as_function, assemble, green_column, solve)
from .wos_mc import WalkConfig, estimate_points

CASES = ("main_i", "main_ii", "main_iii", "generalized_data", "green_function", "uniform")
DEFAULT_LEVELS = tuple(round(0.1 * k, 10) for k in range(1, 10))


class HypothesisError(RuntimeError):
    """A theorem hypothesis failed; ``reports`` holds the failing ConditionReports."""

    def __init__(self, msg, reports):
        super().__init__(msg)
        self.reports = list(reports)


@dataclass
class TheoremCase:
    which: str
    problem: ProblemSpec
    h: float = 1.0 / 64
    levels: Sequence[float] = DEFAULT_LEVELS
    t_grid: Sequence[float] = DEFAULT_T_GRID
    tolerances: dict = field(default_factory=dict)
    n_rays: int = 64
    mc: Optional[WalkConfig] = None
    sample_plan: SamplePlan = SamplePlan()
    box: Optional[tuple] = None
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.which not in CASES:
            raise ValueError(f"unknown theorem case {self.which!r}; expected one of {CASES}")
        if self.h <= 0:
            raise ValueError("h must be positive")
        if any(t <= 1.0 for t in self.t_grid):
            raise ValueError("every t in t_grid must exceed 1")
        if self.which == "main_iii" and not isinstance(self.problem.ring.outer, WholeSpace):
            raise ValueError("main_iii needs a WholeSpace outer domain")


@dataclass
class CaseResult:
    report: StarReport
    field: ScalarField
    outcome: SolveOutcome
    operator: DiscreteOperator
    hypotheses: list


# --- hypotheses ----------------------------------------------------------------

def effective_nonlinearity(data) -> NonlinearitySpec:
    """The f of -(-Delta)^{a/2} u = f(x, u) represented by the problem data."""
    if isinstance(data, NonlinearData):
        return data.f
    q, g = data.q, data.g

    def ev(x, u):
        dim = x.shape[1]
        return -as_function(q, dim)(x) * u - as_function(g, dim)(x)
    return NonlinearitySpec(ev, None, "linear data")


def _exterior_data(data, dim):
    if isinstance(data, NonlinearData):
        return as_function(data.b0, dim), as_function(data.b1, dim)
    hf = as_function(data.h, dim)
    return hf, hf


def _domain_report(name: str, d, strict: bool) -> ConditionReport:
    ok, wit = is_starshaped_set(d)
    notes = []
    if ok and strict:
        counts = _ray_boundary_crossings(d)
        if np.any(counts != 1):
            k = int(np.argmax(counts != 1))
            ok, wit = False, {"ray": k, "crossings": int(counts[k])}
        notes.append("strictness sampled on 256 rays from the origin")
    return ConditionReport(f"{name} starshaped" + (" (strict)" if strict else ""), ok,
                           0.0 if ok else -1.0, wit, 1, notes=notes)


def _ray_boundary_crossings(d, n_rays: int = 256, n_points: int = 2000) -> np.ndarray:
    dim = d.dim
    if dim == 1:
        dirs = np.array([[-1.0], [1.0]])
    else:
        th = 2.0 * np.pi * np.arange(n_rays) / n_rays
        dirs = np.column_stack([np.cos(th), np.sin(th)])
    r_max = 1.5 * d.max_radius() + 1.0
    r = np.linspace(0.0, r_max, n_points)
    out = np.zeros(len(dirs), dtype=int)
    for k, e in enumerate(dirs):
        inside = d.contains(r[:, None] * e[None, :])
        out[k] = int(np.count_nonzero(inside[1:] != inside[:-1]))
    return out


def _data_star_report(name: str, b, ring: RingDomain, t_grid, boundary, value) -> ConditionReport:
    """b has starshaped superlevel sets (sampled b(x) >= b(tx)) and b = value on ``boundary``."""
    lo, hi = ring.bounding_box()
    lo, hi = 1.5 * np.asarray(lo), 1.5 * np.asarray(hi)
    dim = ring.dim
    n = 201 if dim == 1 else 81
    axes = [np.linspace(a, c, n) for a, c in zip(lo, hi)]
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(dim, -1).T
    bx = b(pts)
    worst, wit = math.inf, None
    for t in t_grid:
        m = bx - b(t * pts)
        k = int(np.argmin(m))
        if m[k] < worst:
            worst, wit = float(m[k]), {"x": pts[k].tolist(), "t": float(t)}
    notes = []
    if boundary is not None:
        bp = boundary.boundary_points(512)
        dev = float(np.max(np.abs(b(bp) - value)))
        notes.append(f"max |{name} - {value}| on the boundary: {dev:.3e}")
        if dev > 1e-9:
            return ConditionReport(f"{name} data", False, -dev, {"reason": f"{name} != {value} on boundary"},
                                   len(bp), notes=notes)
    ok = worst >= -1e-12
    return ConditionReport(f"{name} data", ok, worst, None if ok else wit, len(pts), notes=notes)


def _convexity_report(d) -> ConditionReport:
    ok = is_convex(d)
    return ConditionReport("domain convex", ok, 0.0 if ok else -1.0,
                           None if ok else {"domain": d.describe()}, 1)


def is_convex(d) -> bool:
    if isinstance(d, Ball):
        return True
    if isinstance(d, RadialGraph):
        if d.dim == 1:
            return True
        if d.interpolation != "spline":
            return False
        th = 2.0 * np.pi * np.arange(4096) / 4096
        r, r1, r2 = d.rho(th), d.drho(th), d._spline(th, 2)
        return bool(np.min(r ** 2 + 2 * r1 ** 2 - r * r2) >= 0.0)
    return False


def check_hypotheses(case: TheoremCase) -> list:
    """ConditionReports for every hypothesis of the selected theorem."""
    prob, plan = case.problem, case.sample_plan
    ring, alpha = prob.ring, prob.params.alpha
    reps = []
    if case.which == "green_function":
        return [_convexity_report(ring.outer)]
    strict = case.which == "main_ii"
    if not isinstance(ring.outer, WholeSpace):
        reps.append(_domain_report("outer domain", ring.outer, strict))
    if ring.inner is None:
        reps.append(ConditionReport("inner domain present", False, -1.0, {"reason": "ring has no inner domain"}, 0))
    else:
        reps.append(_domain_report("inner domain", ring.inner, strict))
    f = effective_nonlinearity(prob.data)
    if case.which == "uniform":
        rep = cond.check_condition(f, ring, "F5", plan, alpha)
        neg = NonlinearitySpec(lambda x, u: -f(x, u), 0.0, "-f")
        rep2 = cond.check_condition(neg, ring, "F5", plan, alpha)
        reps.append(ConditionReport("f == 0", rep.passed and rep2.passed,
                                    min(rep.worst_margin, rep2.worst_margin),
                                    rep.witness or rep2.witness, rep.n_samples))
        for name, d in (("outer domain", ring.outer), ("inner domain", ring.inner)):
            if d is None or isinstance(d, WholeSpace):
                continue
            try:
                m = uniform_star_margin(d)
            except ValueError as exc:
                reps.append(ConditionReport(f"{name} uniformly starshaped", False, math.nan,
                                            {"reason": str(exc)}, 0))
                continue
            reps.append(ConditionReport(f"{name} uniformly starshaped", m > 0, m,
                                        None if m > 0 else {"domain": d.describe()}, 2048, estimate=m))
        return reps
    wanted = ["F0", "F1", "F2"] + ([] if strict else ["F3"])
    if isinstance(prob.data, LinearData) and (callable(prob.data.q) or prob.data.q != 0):
        qf = as_function(prob.data.q, ring.dim)
        reps.append(cond.check_schrodinger_q(lambda x: -qf(x), ring, plan))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for w in wanted:
            if w == "F2" and f.declared_lipschitz is None:
                rep = cond.check_condition(f, ring, "F2", plan, alpha)
                rep.notes.append("Lipschitz constant estimated only")
            else:
                rep = cond.check_condition(f, ring, w, plan, alpha)
            reps.append(rep)
    if case.which == "generalized_data":
        b0, b1 = _exterior_data(prob.data, ring.dim)
        outer = None if isinstance(ring.outer, WholeSpace) else ring.outer
        reps.append(_data_star_report("b0", b0, ring, case.t_grid, outer, 0.0))
        reps.append(_data_star_report("b1", b1, ring, case.t_grid, ring.inner, 1.0))
    return reps


# --- pipeline --------------------------------------------------------------------

def geometric_tolerance(case: TheoremCase, mc_stderr: float = 0.0) -> float:
    tol = case.tolerances.get("geom")
    return float(tol) if tol is not None else 5.0 * case.h + 3.0 * mc_stderr


def spot_points(ring: RingDomain, n: int = 5) -> np.ndarray:
    """Deterministic interior points midway (by fraction) between the two boundaries."""
    dim = ring.dim
    fracs = (0.3, 0.5, 0.7, 0.4, 0.6)
    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        th = 2.0 * np.pi * np.arange(n) / n + 0.3
        dirs = np.column_stack([np.cos(th), np.sin(th)])
    r = np.linspace(0.0, 3.0 * _outer_extent(ring), 6001)[1:]
    out = []
    for k in range(n):
        e = dirs[k % len(dirs)]
        inside = np.flatnonzero(ring.contains(r[:, None] * e[None, :]))
        r_in, r_out = r[inside[0]], r[inside[-1]]
        out.append((r_in + fracs[k % len(fracs)] * (r_out - r_in)) * e)
    return np.array(out)


def _outer_extent(ring: RingDomain) -> float:
    if isinstance(ring.outer, WholeSpace):
        return 2.0 * ring.inner.max_radius() / 3.0
    return ring.outer.max_radius()


def _mc_spot_checks(case: TheoremCase, fld: ScalarField, cfg: WalkConfig) -> dict:
    prob = case.problem
    ring, dim = prob.ring, prob.ring.dim
    d = prob.data
    b0, b1 = _exterior_data(d, dim)
    if isinstance(d, LinearData):
        qv = as_function(d.q, dim)(np.zeros((1, dim)))
        if np.any(as_function(d.q, dim)(fld.grid.points()) != 0) or qv[0] != 0:
            return {"skipped": "Monte Carlo handles q = 0 only"}
        g = d.g
    else:
        f = d.f
        g = lambda x: -f(x, np.clip(fld(x), 0.0, 1.0))
    pts = spot_points(ring)
    allowance = float(case.tolerances.get("mc_allowance", 0.02))
    ests = estimate_points(pts, ring, b0, b1, g, cfg, prob.params)
    grid_vals = fld(pts)
    rows = []
    for p, e, gv in zip(pts, ests, grid_vals):
        diff = e.mean - gv
        rows.append({"x": p.tolist(), "grid": float(gv), **e.to_dict(), "difference": float(diff),
                     "passed": bool(abs(diff) <= 3 * e.stderr + allowance)})
    return {"points": rows, "passed": all(r["passed"] for r in rows),
            "max_stderr": max(e.stderr for e in ests)}


def ut_minima(fld: ScalarField, ring: RingDomain, t_grid) -> dict:
    """min of u(x) - u(tx) over lattice nodes x outside the closed inner domain with tx in the outer domain, per t."""
    pts = fld.grid.points()
    vals = fld.values.reshape(-1)
    outside_inner = ring.classify(pts) != INNER if ring.inner is not None else np.ones(len(pts), bool)
    out = {}
    for t in t_grid:
        tp = t * pts
        m = outside_inner & ring.outer.contains(tp)
        if isinstance(ring.outer, WholeSpace):
            m &= fld.grid.in_box(tp)
        if not np.any(m):
            out[f"{t:g}"] = {"min": math.inf, "x": None, "n_nodes": 0}
            continue
        diff = vals[m] - fld(tp[m])
        k = int(np.argmin(diff))
        out[f"{t:g}"] = {"min": float(diff[k]), "x": pts[m][k].tolist(), "n_nodes": int(np.count_nonzero(m))}
    return out


def strict_margin(fld: ScalarField, ring: RingDomain, t_grid, n_rays: int = 64, n_points: int = 200) -> float:
    """min of u(x) - u(tx) over ray samples with x and tx both in the ring."""
    from .geometry import sample_rays
    pts, _, _ = sample_rays(fld, np.zeros(fld.dim), n_rays, n_points)
    flat = pts.reshape(-1, fld.dim)
    base = fld(flat)
    inside = ring.contains(flat)
    worst = math.inf
    for t in t_grid:
        m = inside & ring.contains(t * flat)
        if np.any(m):
            worst = min(worst, float(np.min(base[m] - fld(t * flat[m]))))
    return worst


def run_case(case: TheoremCase) -> CaseResult:
    """Hypotheses, solve, then the geometric checks; see :func:`analyze_solution`."""
    if case.which == "green_function":
        raise ValueError("use green_star_check for Green-function cases")
    hyps = check_hypotheses(case)
    failed = [r for r in hyps if not r.passed]
    if failed:
        raise HypothesisError("hypothesis failed: " + ", ".join(r.condition for r in failed), hyps)
    prob = case.problem
    kw = {"box": case.box} if case.box is not None else {}
    if isinstance(prob.data, NonlinearData):
        kw.update(case.solver)
        kw["raise_on_failure"] = True
    op, outcome = solve(prob, case.h, **kw)
    if not outcome.converged:
        raise NonConvergenceError(f"solve did not converge (residual {outcome.residual:.3e})", outcome)
    fld = outcome.field
    notes = []
    mc = None
    stderr = 0.0
    if case.mc is not None:
        mc = _mc_spot_checks(case, fld, case.mc)
        stderr = mc.get("max_stderr", 0.0)
    tol = geometric_tolerance(case, stderr)
    ray = ray_monotonicity(fld, n_rays=case.n_rays, t_grid=case.t_grid, tol=tol)
    levels = []
    band = float(case.tolerances.get("crossing_band", 1e-6))
    for lv in case.levels:
        v = level_star_check(fld, lv, tol=tol)
        if case.which == "main_ii":
            counts = count_crossings(fld, lv, n_rays=case.n_rays, tol=band)
            v.max_crossings = int(counts.max())
            if np.any(counts != 1):
                k = int(np.argmax(counts != 1))
                v.passed = False
                v.witness = {"ray": k, "crossings": int(counts[k])}
        levels.append(v)
    utm = ut_minima(fld, prob.ring, case.t_grid)
    ut_ok = all(v["min"] >= -tol for v in utm.values())
    u_int = fld.values.reshape(-1)[op.interior]
    lo, hi = float(u_int.min()), float(u_int.max())
    if case.which in ("main_ii",) and not (lo > 0 and hi < 1):
        notes.append(f"solution range [{lo:.3g}, {hi:.3g}] is not inside (0, 1)")
    elif not (lo >= -1e-12 and hi <= 1 + 1e-12):
        notes.append(f"solution range [{lo:.3g}, {hi:.3g}] leaves [0, 1]")
    passed = ray.passed and all(v.passed for v in levels) and ut_ok
    report = StarReport(passed=passed, tolerance=tol, worst_violation=ray.worst_violation,
                        witness=ray.witness, levels=levels, ut_minima=utm, notes=notes,
                        extras={"case": case.which, "h": case.h, "solve": outcome.summary(),
                                "ray": ray.extras, "solution_range": [lo, hi],
                                "n_unknowns": op.n_unknowns})
    if not ut_ok:
        t_bad = min(utm, key=lambda k: utm[k]["min"])
        report.notes.append(f"u_t minimum below tolerance at t={t_bad}")
        if report.witness is None:
            report.witness = {"t": t_bad, "x": utm[t_bad]["x"], "u_t": utm[t_bad]["min"]}
    if case.which == "main_ii":
        report.strict_margin = strict_margin(fld, prob.ring, case.t_grid, case.n_rays)
    if case.which == "uniform":
        gm = gradient_margin_details(fld, prob.ring)
        report.uniform_margin = -gm["margin"] if math.isfinite(gm["margin"]) else math.nan
        report.extras["gradient"] = gm
        if not (gm["margin"] < 0):
            report.passed = False
            report.notes.append("gradient margin is not negative")
    if mc is not None:
        report.extras["mc"] = mc
        if mc.get("passed") is False:
            report.passed = False
            report.notes.append("Monte Carlo spot check disagrees with the grid solution")
    return CaseResult(report, fld, outcome, op, hyps)


def analyze_solution(case: TheoremCase) -> StarReport:
    return run_case(case).report


# --- gradient margin -------------------------------------------------------------

def gradient_margin_details(fld: ScalarField, ring: RingDomain, collar: float = 3.0,
                            grad_floor: float = 1e-10) -> dict:
    """max of <x, grad u>/|grad u| over interior nodes beyond the boundary collar."""
    g = fld.grid
    h = g.spacing
    vals = fld.values
    pts = g.points()
    keep = ring.contains(pts) & (ring.boundary_distance(pts) > collar * h)
    idx = np.flatnonzero(keep)
    coords = np.array(np.unravel_index(idx, g.shape)).T
    ok = np.all((coords >= 1) & (coords <= np.asarray(g.shape) - 2), axis=1)
    idx, coords = idx[ok], coords[ok]
    grad = np.zeros((len(idx), g.dim))
    for k in range(g.dim):
        up, dn = coords.copy(), coords.copy()
        up[:, k] += 1
        dn[:, k] -= 1
        grad[:, k] = (vals[tuple(up.T)] - vals[tuple(dn.T)]) / (2 * h)
    norm = np.linalg.norm(grad, axis=1)
    flat = norm < grad_floor
    good = ~flat
    out = {"n_nodes": int(np.count_nonzero(good)), "n_excluded_flat": int(np.count_nonzero(flat)),
           "collar": collar * h}
    if not np.any(good):
        out.update(margin=math.nan, witness=None, note="all nodes excluded (vanishing gradient)")
        return out
    w = np.sum(pts[idx[good]] * grad[good], axis=1) / norm[good]
    k = int(np.argmax(w))
    out.update(margin=float(w[k]), witness={"x": pts[idx[good]][k].tolist(), "ratio": float(w[k])})
    return out


def gradient_margin(fld: ScalarField, ring: RingDomain) -> float:
    """max over collar-excluded interior nodes of <x, grad u>/|grad u| (nan if undefined)."""
    return gradient_margin_details(fld, ring)["margin"]


# --- Green functions ----------------------------------------------------------------

def _green_levels(vmin: float, vmax: float, n: int = 9):
    return [vmin + (vmax - vmin) * k / (n + 1) for k in range(1, n + 1)]


def green_star_check(y, params: FracParams, domain, h: Optional[float] = 1.0 / 64,
                     t_grid=DEFAULT_T_GRID, tol: Optional[float] = None, n_rays: int = 64,
                     n_points: int = 100) -> StarReport:
    """Ray monotonicity of the Green function with pole y, about y, and star checks of its superlevel sets.

    1D uses the closed form (tolerance 1e-9 by default); 2D solves for the
    discrete Green column (tolerance 5h by default) and excludes the node at y
    and its neighbours.
    """
    if not is_convex(domain):
        raise ValueError("Green-function checks are for convex domains")
    y = np.atleast_1d(np.asarray(y, float))
    if not domain.contains(y[None])[0]:
        raise ValueError("pole must lie inside the domain")
    if params.dim == 1:
        return _green_check_1d(float(y[0]), params, domain, t_grid, 1e-9 if tol is None else tol, n_points)
    return _green_check_2d(y, params, domain, h, t_grid, tol, n_rays)


def _green_1d(x, y, p, domain):
    if isinstance(domain, Ball):
        c, r = domain.center[0], domain.r
    else:
        lo, hi = domain.origin[0] - domain.radii[0], domain.origin[0] + domain.radii[1]
        c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
    if abs(x - c) >= r:
        return 0.0
    return ball_green(x, y, p, c, r)


def _green_check_1d(y, p, domain, t_grid, tol, n_points) -> StarReport:
    if isinstance(domain, Ball):
        lo, hi = domain.center[0] - domain.r, domain.center[0] + domain.r
    else:
        lo, hi = domain.origin[0] - domain.radii[0], domain.origin[0] + domain.radii[1]
    worst, wit = math.inf, None
    samples = []
    for sgn, edge in ((-1.0, lo), (1.0, hi)):
        length = abs(edge - y)
        s = length * (np.arange(1, n_points + 1) / (n_points + 1))
        gx = np.array([_green_1d(y + sgn * v, y, p, domain) for v in s])
        samples.append(gx)
        for t in t_grid:
            gt = np.array([_green_1d(y + sgn * t * v, y, p, domain) for v in s])
            d = gx - gt
            k = int(np.argmin(d))
            if d[k] < worst:
                worst = float(d[k])
                wit = {"x": float(y + sgn * s[k]), "t": float(t), "G_x": float(gx[k]), "G_tx": float(gt[k])}
    vals = np.concatenate(samples)
    levels = []
    for lv in _green_levels(0.0, float(vals.max())):
        # along each ray {G >= lv} must be an initial segment from y
        ok = True
        for gx in samples:
            above = gx >= lv
            if np.any(above):
                last = int(np.max(np.flatnonzero(above)))
                ok &= bool(np.all(above[:last + 1]))
        levels.append(LevelVerdict(lv, ok, 0.0 if ok else -1.0, int(sum(np.sum(g >= lv) for g in samples))))
    passed = worst >= -tol and all(v.passed for v in levels)
    return StarReport(passed, tol, worst, None if worst >= -tol else wit, levels,
                      extras={"dim": 1, "pole": y, "alpha": p.alpha, "n_points": n_points,
                              "t_grid": list(map(float, t_grid)), "method": "closed form"})


def green_sign_pattern(y: float, p: FracParams, xs) -> dict:
    """Counts of sample points where d/dx G(x, y) has the predicted sign."""
    xs = np.asarray(xs, float)
    xs = xs[np.abs(xs - y) > 0]
    d = np.array([interval_green_dx(x, y, p) for x in xs])
    expected = np.where(xs < y, 1.0, -1.0)
    good = np.sign(d) == expected
    return {"n": int(len(xs)), "n_match": int(np.count_nonzero(good)),
            "mismatches": xs[~good].tolist()}


def _green_check_2d(y, p, domain, h, t_grid, tol, n_rays) -> StarReport:
    ring = RingDomain(domain)
    op = assemble(ring, p, h)
    fld = green_column(op, y)
    pts = op.interior_points()
    pole = pts[int(np.argmin(np.linalg.norm(pts - y, axis=1)))]
    tol = 5.0 * h if tol is None else tol
    excl = 2.0 * math.sqrt(2.0) * h * 1.0001
    ray = ray_monotonicity(fld, n_rays=n_rays, t_grid=t_grid, tol=tol, center=pole, exclude_radius=excl)
    far = np.linalg.norm(op.points() - pole, axis=1) > excl
    vals = fld.values.reshape(-1)
    vmax = float(np.max(vals[far]))
    levels = [level_star_check(fld, lv, tol=tol, center=pole, exclude_radius=excl)
              for lv in _green_levels(0.0, vmax)]
    passed = ray.passed and all(v.passed for v in levels)
    return StarReport(passed, tol, ray.worst_violation, ray.witness, levels,
                      extras={"dim": 2, "pole": y.tolist(), "pole_node": pole.tolist(), "h": h,
                              "alpha": p.alpha, "exclude_radius": excl, "ray": ray.extras,
                              "method": "discrete Green column"})
