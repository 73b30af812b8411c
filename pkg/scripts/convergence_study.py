"""Grid convergence of the torsion problem on (-1, 1) against the exact mean exit time."""

import argparse

import numpy as np

from fracstar.geometry import Ball, RingDomain
from fracstar.kernels import FracParams, expected_exit_time_ball
from fracstar.solver_grid import LinearData, ProblemSpec, solve


def study(alpha: float, hs):
    p = FracParams(alpha, 1)
    ring = RingDomain(Ball((0.0,), 1.0))
    xs = np.linspace(-0.9, 0.9, 19)
    exact = np.array([expected_exit_time_ball([x], [0.0], 1.0, p) for x in xs])
    rows = []
    for h in hs:
        _, out = solve(ProblemSpec(ring, p, LinearData(g=1.0)), h)
        rows.append((h, float(np.max(np.abs(out.field(xs[:, None]) - exact)))))
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.5, 1.0, 1.5])
    args = ap.parse_args()
    hs = [1 / 32, 1 / 64, 1 / 128, 1 / 256, 1 / 512]
    for a in args.alpha:
        rows = study(a, hs)
        print(f"alpha = {a}")
        for (h, e), (_, e_next) in zip(rows, rows[1:] + [(None, None)]):
            rate = "" if e_next is None else f"  observed order {np.log2(e / e_next):.2f}"
            print(f"  h = 1/{round(1 / h):4d}  max error {e:.3e}{rate}")
