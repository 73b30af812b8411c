"""Command-line entry point: ``python -m fracstar <subcommand> --config PATH``.

Exit status: 0 all checks pass, 2 config error, 3 hypothesis failure,
4 solver non-convergence, 5 geometric check failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import conditions as cond
from .config import SUBCOMMANDS, ConfigError, RunConfig, load
from .reports import jsonable, write_json
from .solver_grid import NonConvergenceError, solve
from .star_analysis import (HypothesisError, effective_nonlinearity, green_sign_pattern, green_star_check,
                            run_case, spot_points)
from .wos_mc import estimate_points

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_NONCONVERGENCE, EXIT_GEOMETRY = 0, 2, 3, 4, 5

log = logging.getLogger("fracstar")


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracstar", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, metavar="PATH")
        p.add_argument("--out", type=Path, metavar="DIR")
        p.add_argument("--seed", type=_u64, metavar="U64")
        p.add_argument("--tol", type=float, metavar="REAL")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


# --- subcommands ------------------------------------------------------------------

def _problem_block(cfg: RunConfig) -> dict:
    return {"config": cfg.raw, "seed": cfg.seed}


def cmd_solve(cfg: RunConfig) -> int:
    try:
        op, out = solve(cfg.problem, cfg.h, **cfg.solve_kwargs())
    except NonConvergenceError as exc:
        write_json(cfg.out / "outcome.json", {**_problem_block(cfg), "error": str(exc),
                                             "outcome": exc.outcome.summary() if exc.outcome else None})
        return EXIT_NONCONVERGENCE
    out.field.to_csv(cfg.out / "field.csv")
    write_json(cfg.out / "outcome.json", {**_problem_block(cfg), "grid": op.grid.describe(),
                                         "n_unknowns": op.n_unknowns, "outcome": out.summary()})
    return EXIT_OK if out.converged else EXIT_NONCONVERGENCE


def cmd_analyze(cfg: RunConfig) -> int:
    try:
        res = run_case(cfg.theorem_case())
    except HypothesisError as exc:
        write_json(cfg.out / "conditions.json", {**_problem_block(cfg), "error": str(exc),
                                                "reports": exc.reports})
        return EXIT_HYPOTHESIS
    except NonConvergenceError as exc:
        write_json(cfg.out / "report.json", {**_problem_block(cfg), "error": str(exc),
                                            "outcome": exc.outcome.summary() if exc.outcome else None})
        return EXIT_NONCONVERGENCE
    res.field.to_csv(cfg.out / "field.csv")
    write_json(cfg.out / "report.json", {**_problem_block(cfg), "case": cfg.case,
                                        "hypotheses": res.hypotheses, "report": res.report})
    return EXIT_OK if res.report.passed else EXIT_GEOMETRY


def cmd_green(cfg: RunConfig) -> int:
    try:
        rep = green_star_check(cfg.pole, cfg.params, cfg.green_domain, cfg.h, cfg.t_grid,
                               cfg.tolerances.get("geom"), cfg.n_rays)
    except ValueError as exc:
        write_json(cfg.out / "green_report.json", {**_problem_block(cfg), "error": str(exc)})
        return EXIT_HYPOTHESIS
    body = {**_problem_block(cfg), "report": rep}
    ok = rep.passed
    if cfg.params.dim == 1:
        d = cfg.green_domain
        lo, hi = d.bounding_box()
        xs = np.random.default_rng(cfg.seed).uniform(lo[0], hi[0], 1000)
        pattern = green_sign_pattern(float(cfg.pole[0]), cfg.params, xs) if _unit_interval(d) else None
        if pattern is not None:
            body["sign_pattern"] = pattern
            ok = ok and pattern["n_match"] == pattern["n"]
    write_json(cfg.out / "green_report.json", body)
    return EXIT_OK if ok else EXIT_GEOMETRY


def _unit_interval(d) -> bool:
    lo, hi = d.bounding_box()
    return abs(lo[0] + 1.0) < 1e-12 and abs(hi[0] - 1.0) < 1e-12


def cmd_mc_compare(cfg: RunConfig) -> int:
    try:
        op, out = solve(cfg.problem, cfg.h, **cfg.solve_kwargs())
    except NonConvergenceError as exc:
        write_json(cfg.out / "mc_report.json", {**_problem_block(cfg), "error": str(exc)})
        return EXIT_NONCONVERGENCE
    ring = cfg.problem.ring
    pts = cfg.mc_points if cfg.mc_points is not None else spot_points(ring)
    d = cfg.problem.data
    from .solver_grid import LinearData
    if isinstance(d, LinearData):
        b0 = b1 = d.h
        g = None if (not callable(d.g) and d.g == 0) else d.g
    else:
        b0, b1 = d.b0, d.b1
        f, fld = d.f, out.field
        g = lambda x: -f(x, np.clip(fld(x), 0.0, 1.0))
        if f.label == "zero":
            g = None
    ests = estimate_points(pts, ring, b0, b1, g, cfg.walk, cfg.params)
    allowance = float(cfg.tolerances.get("mc_allowance", 0.02))
    grid_vals = out.field(pts)
    rows = []
    for p, e, gv in zip(pts, ests, grid_vals):
        diff = e.mean - float(gv)
        rows.append({"x": p.tolist(), "grid": float(gv), "mc": e.to_dict(), "difference": diff,
                     "bound": 3.0 * e.stderr + allowance, "passed": bool(abs(diff) <= 3.0 * e.stderr + allowance)})
    ok = all(r["passed"] for r in rows)
    walk = jsonable(cfg.walk)
    walk.pop("workers")  # results do not depend on it; keep reports comparable across worker counts
    write_json(cfg.out / "mc_report.json", {**_problem_block(cfg), "walk": walk, "grid_residual": out.residual,
                                           "points": rows, "passed": ok})
    return EXIT_OK if ok else EXIT_GEOMETRY


def cmd_conditions(cfg: RunConfig) -> int:
    prob = cfg.problem
    f = effective_nonlinearity(prob.data)
    checks = cfg.conditions or ("F1", "F2", "F3", "F4")
    reports = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for c in checks:
            if c == "F5F6":
                reports.append(cond.verify_remark_f5f6(f, prob.ring, cfg.sample_plan, cfg.params.alpha))
            elif c == "q":
                q = getattr(prob.data, "q", 0.0)
                qf = q if callable(q) else (lambda x, c0=q: np.full(len(x), c0))
                reports.append(cond.check_schrodinger_q(lambda x: -qf(x), prob.ring, cfg.sample_plan))
            else:
                reports.append(cond.check_condition(f, prob.ring, c, cfg.sample_plan, cfg.params.alpha))
    ok = all(r.passed for r in reports)
    body = {**_problem_block(cfg), "reports": reports}
    if cfg.flags is not None:
        body["allen_cahn_flags"] = cfg.flags
        if cfg.require_case is not None:
            flag = cfg.flags[cfg.require_case]
            pr = cfg.raw["problem"]["nonlinearity"]
            rule = "beta >= gamma" if cfg.require_case == "case_i" else "beta >= p * gamma"
            body["required_case"] = {"case": cfg.require_case, "passed": flag, "rule": rule,
                                     "witness": None if flag else {k: pr[k] for k in ("beta", "gamma", "p")}}
            ok = ok and flag
    write_json(cfg.out / "conditions.json", body)
    return EXIT_OK if ok else EXIT_HYPOTHESIS


COMMANDS = {"solve": cmd_solve, "analyze": cmd_analyze, "green": cmd_green,
            "mc-compare": cmd_mc_compare, "conditions": cmd_conditions}


def run(cfg: RunConfig) -> int:
    cfg.out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[cfg.subcommand](cfg)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat()
    out_dir = args.out or Path("out")
    try:
        cfg = load(args.config, args.subcommand, out=args.out, seed=args.seed, tol=args.tol)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        write_json(out_dir / "error.json", {"error": str(exc), "kind": "config"})
        return EXIT_CONFIG
    log.info("running %s with output in %s", cfg.subcommand, cfg.out)
    status = run(cfg)
    write_json(cfg.out / "metadata.json", {"started": stamp, "elapsed_seconds": time.time() - started,
                                          "argv": argv, "version": __version__, "status": status})
    return status


if __name__ == "__main__":
    sys.exit(main())
