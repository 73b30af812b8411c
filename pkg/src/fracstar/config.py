"""YAML run configurations and the name registries they refer to.

Everything is validated while the config is built, before any computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import yaml

from .conditions import CONDITIONS, NonlinearitySpec, SamplePlan, make_allen_cahn, schrodinger, zero_nonlinearity
from .geometry import DEFAULT_T_GRID, Ball, RadialGraph, RingDomain, WholeSpace
from .kernels import FracParams
from .solver_grid import LinearData, NonlinearData, ProblemSpec, exterior_rule
from .star_analysis import CASES, DEFAULT_LEVELS, TheoremCase
from .wos_mc import WalkConfig

SUBCOMMANDS = ("solve", "analyze", "green", "mc-compare", "conditions")


class ConfigError(ValueError):
    pass


def _req(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"{where}: missing key {key!r}")
    return d[key]


def _num(v, where: str, lo=-math.inf, hi=math.inf, open_lo=False, open_hi=False) -> float:
    try:
        x = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {v!r}") from None
    bad = (x < lo or x > hi or (open_lo and x == lo) or (open_hi and x == hi) or not math.isfinite(x))
    if bad:
        raise ConfigError(f"{where}: {x} out of range")
    return x


def _int(v, where: str, lo: int = 0) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    if int(v) < lo:
        raise ConfigError(f"{where}: must be at least {lo}")
    return int(v)


def _point(v, dim: int, where: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float)) if v is not None else None
    if arr is None or arr.shape != (dim,) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{where}: expected a point with {dim} coordinates, got {v!r}")
    return arr


# --- domains ---------------------------------------------------------------------

def _fourier_rho(spec: dict, where: str) -> Callable:
    base = _num(_req(spec, "base", where), where + ".base", 0, open_lo=True)
    terms = []
    for i, t in enumerate(spec.get("terms", [])):
        w = f"{where}.terms[{i}]"
        kind = t.get("kind", "cos")
        if kind not in ("cos", "sin"):
            raise ConfigError(f"{w}: kind must be cos or sin")
        terms.append((_num(_req(t, "amp", w), w + ".amp"), _int(_req(t, "k", w), w + ".k", 1), kind))

    def rho(th):
        out = np.full_like(np.asarray(th, float), base)
        for amp, k, kind in terms:
            out += amp * (np.cos(k * th) if kind == "cos" else np.sin(k * th))
        return out
    return rho


def build_domain(spec: dict, dim: int, where: str):
    kind = _req(spec, "kind", where)
    if kind == "ball":
        c = _point(spec.get("center", [0.0] * dim), dim, where + ".center")
        return Ball(tuple(c), _num(_req(spec, "radius", where), where + ".radius", 0, open_lo=True))
    if kind == "interval":
        lo, hi = (_num(_req(spec, k, where), f"{where}.{k}") for k in ("lo", "hi"))
        if dim != 1 or not lo < 0 < hi:
            raise ConfigError(f"{where}: an interval needs dim 1 and lo < 0 < hi")
        return RadialGraph((0.0,), (-lo, hi))
    if kind == "radial":
        if dim != 2:
            raise ConfigError(f"{where}: radial domains are 2D")
        c = _point(spec.get("center", [0.0, 0.0]), 2, where + ".center")
        rho = _fourier_rho(_req(spec, "rho", where), where + ".rho")
        n = _int(spec.get("samples", 2048), where + ".samples", 16)
        th = 2.0 * np.pi * np.arange(n) / n
        if np.min(rho(th)) <= 0:
            raise ConfigError(f"{where}: radial function must be positive")
        return RadialGraph.from_function(rho, tuple(c), n)
    if kind == "whole_space":
        return WholeSpace(dim, _num(spec.get("bounding_radius", 8.0), where + ".bounding_radius",
                                    0, open_lo=True))
    raise ConfigError(f"{where}: unknown domain kind {kind!r}")


def build_ring(spec: dict, dim: int) -> RingDomain:
    outer = build_domain(_req(spec, "outer", "ring"), dim, "ring.outer")
    inner = spec.get("inner")
    inner = None if inner is None else build_domain(inner, dim, "ring.inner")
    try:
        return RingDomain(outer, inner)
    except ValueError as exc:
        raise ConfigError(f"ring: {exc}") from None


# --- functions of x ------------------------------------------------------------------

def _norm(x):
    return np.linalg.norm(x, axis=1)


def build_function(spec, dim: int, where: str, ring: Optional[RingDomain] = None):
    """A function of x (m, N) -> (m,), or a float, from a registry entry."""
    if spec is None:
        return 0.0
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return float(spec)
    name = _req(spec, "name", where)
    if name == "constant":
        return _num(_req(spec, "value", where), where + ".value")
    if name == "radial_power":
        c = _num(spec.get("coef", 1.0), where + ".coef")
        k = _num(spec.get("power", 2.0), where + ".power", 0)
        return lambda x: c * _norm(x) ** k
    if name == "radial_bump":
        r = _num(_req(spec, "radius", where), where + ".radius", 0, open_lo=True)
        amp = _num(spec.get("amp", 0.5), where + ".amp", 0)
        base = _num(spec.get("base", 1.0), where + ".base")
        return lambda x: base + amp * np.maximum(0.0, 1.0 - _norm(x) ** 2 / r ** 2)
    if name == "exp_decay":
        c = _num(spec.get("coef", 1.0), where + ".coef")
        return lambda x: c * np.exp(-_norm(x))
    if name == "inner_indicator":
        if ring is None or ring.inner is None:
            raise ConfigError(f"{where}: inner_indicator needs a ring with an inner domain")
        inner = ring.inner
        return lambda x: inner.contains(x, closed=True).astype(float)
    raise ConfigError(f"{where}: unknown function {name!r}")


# --- nonlinearities ----------------------------------------------------------------

def build_nonlinearity(spec: dict, dim: int, where: str = "nonlinearity"):
    """(NonlinearitySpec, allen_cahn flags or None)."""
    name = _req(spec, "name", where)
    if name == "zero":
        return zero_nonlinearity(), None
    if name == "allen_cahn":
        beta = _num(_req(spec, "beta", where), where + ".beta")
        gamma = _num(_req(spec, "gamma", where), where + ".gamma")
        p = _num(_req(spec, "p", where), where + ".p")
        try:
            ac = make_allen_cahn(beta, gamma, p)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        return ac.spec, {"case_i": ac.case_i, "case_ii": ac.case_ii}
    if name == "constant":
        c = _num(_req(spec, "value", where), where + ".value")
        return NonlinearitySpec(lambda x, u: np.full(len(x), c), 0.0, f"constant({c})"), None
    if name == "radial_weight":
        c = _num(spec.get("coef", 1.0), where + ".coef")
        k = _num(spec.get("power", 2.0), where + ".power", 0)
        return NonlinearitySpec(lambda x, u: c * _norm(x) ** k * u, None,
                                f"radial_weight(coef={c}, power={k})"), None
    if name == "shifted_weight":
        s = _num(spec.get("shift", 2.0), where + ".shift")
        return NonlinearitySpec(lambda x, u: (s - _norm(x)) * u, None, f"({s} - |x|) u"), None
    if name == "schrodinger":
        q = build_function(_req(spec, "q", where), dim, where + ".q")
        qf = q if callable(q) else (lambda x, c=q: np.full(len(x), c))
        return schrodinger(qf, spec.get("q_bound"), "q(x) u"), None
    if name == "tabulated":
        us = np.asarray(_req(spec, "u", where), float)
        fs = np.asarray(_req(spec, "f", where), float)
        if us.ndim != 1 or us.shape != fs.shape or len(us) < 2 or np.any(np.diff(us) <= 0):
            raise ConfigError(f"{where}: tabulated u must be increasing and match f in length")
        if us[0] > 0 or us[-1] < 1:
            raise ConfigError(f"{where}: tabulated u must cover [0, 1]")
        lip = float(np.max(np.abs(np.diff(fs) / np.diff(us))))
        return NonlinearitySpec(lambda x, u: np.interp(u, us, fs), lip, "tabulated f(u)"), None
    raise ConfigError(f"{where}: unknown nonlinearity {name!r}")


# --- run configuration ---------------------------------------------------------------

@dataclass
class RunConfig:
    subcommand: str
    problem: Optional[ProblemSpec]
    raw: dict
    case: str = "main_i"
    h: float = 1.0 / 64
    box: Optional[tuple] = None
    walk: WalkConfig = WalkConfig()
    tolerances: dict = field(default_factory=dict)
    out: Path = Path("out")
    seed: int = 0
    levels: tuple = DEFAULT_LEVELS
    t_grid: tuple = DEFAULT_T_GRID
    n_rays: int = 64
    mc_spot_checks: bool = False
    mc_points: Optional[np.ndarray] = None
    sample_plan: SamplePlan = SamplePlan()
    conditions: tuple = ()
    require_case: Optional[str] = None
    flags: Optional[dict] = None
    pole: Optional[np.ndarray] = None
    green_domain: object = None
    params: Optional[FracParams] = None
    solver: dict = field(default_factory=dict)

    def solve_kwargs(self) -> dict:
        kw = {"box": self.box} if self.box is not None else {}
        if isinstance(self.problem.data, NonlinearData):
            kw.update(self.solver)
        return kw

    def theorem_case(self) -> TheoremCase:
        return TheoremCase(self.case, self.problem, self.h, self.levels, self.t_grid, dict(self.tolerances),
                           self.n_rays, self.walk if self.mc_spot_checks else None, self.sample_plan, self.box,
                           dict(self.solver))


def _params(raw: dict) -> FracParams:
    pr = _req(raw, "problem", "config")
    alpha = _num(_req(pr, "alpha", "problem"), "problem.alpha", 0, 2, True, True)
    dim = _int(_req(pr, "dim", "problem"), "problem.dim", 1)
    if dim > 2:
        raise ConfigError("problem.dim: grids are 1D or 2D")
    return FracParams(alpha, dim)


def build_problem(raw: dict, params: FracParams) -> ProblemSpec:
    pr = raw["problem"]
    dim = params.dim
    ring = build_ring(_req(pr, "ring", "problem"), dim)
    b0 = build_function(pr.get("b0", 0.0), dim, "problem.b0", ring)
    b1 = build_function(pr.get("b1", 1.0), dim, "problem.b1", ring)
    if "linear" in pr:
        lin = pr["linear"]
        q = build_function(lin.get("q", 0.0), dim, "problem.linear.q", ring)
        g = build_function(lin.get("g", 0.0), dim, "problem.linear.g", ring)
        pts = np.random.default_rng(0).uniform(-2, 2, (256, dim))
        qv = q(pts) if callable(q) else np.array([q])
        if np.any(qv > 0):
            raise ConfigError("problem.linear.q must be nonpositive")
        b0f = b0 if callable(b0) else (lambda x, c=b0: np.full(len(x), c))
        b1f = b1 if callable(b1) else (lambda x, c=b1: np.full(len(x), c))
        far = b0 if not callable(b0) else None
        return ProblemSpec(ring, params, LinearData(q, g, exterior_rule(ring, b0f, b1f), far))
    f, _ = build_nonlinearity(pr.get("nonlinearity", {"name": "zero"}), dim)
    return ProblemSpec(ring, params, NonlinearData(f, b0, b1))


def from_dict(raw: dict, subcommand: Optional[str] = None, out=None, seed=None, tol=None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    sub = subcommand or raw.get("subcommand")
    if sub not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {sub!r}")
    seed = raw.get("seed", 0) if seed is None else seed
    seed = _int(seed, "seed")
    if seed >= 2 ** 64:
        raise ConfigError("seed must fit in 64 bits")
    params = _params(raw)
    cfg = RunConfig(sub, None, raw, params=params, seed=seed)
    cfg.out = Path(out if out is not None else raw.get("output", "out"))
    grid = raw.get("grid", {}) or {}
    cfg.h = _num(grid.get("h", 1.0 / 64), "grid.h", 0, 1, open_lo=True)
    if grid.get("box") is not None:
        lo, hi = grid["box"]
        cfg.box = (_point(lo, params.dim, "grid.box[0]"), _point(hi, params.dim, "grid.box[1]"))
    sv = dict(raw.get("solver", {}) or {})
    unknown = set(sv) - {"max_iter", "tol", "damping"}
    if unknown:
        raise ConfigError(f"solver: unknown keys {sorted(unknown)}")
    if "max_iter" in sv:
        sv["max_iter"] = _int(sv["max_iter"], "solver.max_iter", 1)
    for k in ("tol", "damping"):
        if k in sv:
            sv[k] = _num(sv[k], f"solver.{k}", 0, open_lo=True)
    cfg.solver = sv
    tols = dict(raw.get("tolerances", {}) or {})
    for k, v in tols.items():
        if v is not None:
            tols[k] = _num(v, f"tolerances.{k}", 0)
    if tol is not None:
        tols["geom"] = _num(tol, "--tol", 0)
    cfg.tolerances = tols
    walk = dict(raw.get("walk", {}) or {})
    try:
        cfg.walk = WalkConfig(step_fraction=_num(walk.get("step_fraction", 0.5), "walk.step_fraction"),
                              max_steps=_int(walk.get("max_steps", 10_000), "walk.max_steps", 1),
                              n_samples=_int(walk.get("n_samples", 100_000), "walk.n_samples", 1),
                              base_seed=seed,
                              chunk_size=_int(walk.get("chunk_size", 8192), "walk.chunk_size", 1),
                              workers=_int(walk.get("workers", 1), "walk.workers", 1),
                              escape_radius=walk.get("escape_radius"))
    except ValueError as exc:
        raise ConfigError(f"walk: {exc}") from None
    an = raw.get("analysis", {}) or {}
    cfg.case = an.get("case", raw.get("case", "main_i"))
    if cfg.case not in CASES:
        raise ConfigError(f"analysis.case: unknown case {cfg.case!r}")
    cfg.levels = tuple(_num(v, "analysis.levels", 0, open_lo=True) for v in an.get("levels", DEFAULT_LEVELS))
    cfg.t_grid = tuple(_num(v, "analysis.t_grid", 1, open_lo=True) for v in an.get("t_grid", DEFAULT_T_GRID))
    cfg.n_rays = _int(an.get("n_rays", 64), "analysis.n_rays", 1)
    cfg.mc_spot_checks = bool(an.get("mc_spot_checks", False))
    cd = raw.get("conditions", {}) or {}
    cfg.sample_plan = SamplePlan(n_samples=_int(cd.get("n_samples", 10_000), "conditions.n_samples", 1),
                                 t_max=_num(cd.get("t_max", 4.0), "conditions.t_max", 1, open_lo=True),
                                 seed=seed,
                                 box_radius=cd.get("box_radius"))
    checks = tuple(cd.get("check", ()))
    for c in checks:
        if c not in CONDITIONS + ("F5F6", "q"):
            raise ConfigError(f"conditions.check: unknown condition {c!r}")
    cfg.conditions = checks
    cfg.require_case = cd.get("require_case")
    if cfg.require_case not in (None, "case_i", "case_ii"):
        raise ConfigError("conditions.require_case must be case_i or case_ii")
    if sub == "green":
        gr = _req(raw, "green", "config")
        cfg.green_domain = build_domain(_req(gr, "domain", "green"), params.dim, "green.domain")
        cfg.pole = _point(_req(gr, "pole", "green"), params.dim, "green.pole")
        return cfg
    cfg.problem = build_problem(raw, params)
    nl = raw["problem"].get("nonlinearity")
    if nl is not None:
        cfg.flags = build_nonlinearity(nl, params.dim)[1]
    if cfg.require_case is not None and cfg.flags is None:
        raise ConfigError("conditions.require_case needs an allen_cahn nonlinearity")
    mc = raw.get("mc", {}) or {}
    if mc.get("points") is not None:
        cfg.mc_points = np.array([_point(p, params.dim, "mc.points") for p in mc["points"]])
    if sub == "mc-compare":
        if isinstance(cfg.problem.data, LinearData) and (callable(cfg.problem.data.q) or cfg.problem.data.q != 0):
            raise ConfigError("mc-compare needs q = 0 (the walk estimator has no gauge term)")
        pts = cfg.mc_points
        if pts is not None and not np.all(cfg.problem.ring.contains(pts)):
            raise ConfigError("mc.points must lie in the ring interior")
    return cfg


def load(path, subcommand: Optional[str] = None, **overrides) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return from_dict(raw, subcommand, **overrides)
