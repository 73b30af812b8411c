"""Sensitivity of a whole-space solution to the truncation radius of the lattice box.

Harmonic problem in R minus [-1, 1] with u = 1 on the inner interval and u -> 0
at infinity (alpha < 1, so the process is transient).
"""

import argparse

import numpy as np

from fracstar.conditions import zero_nonlinearity
from fracstar.geometry import Ball, RingDomain, WholeSpace
from fracstar.kernels import FracParams
from fracstar.solver_grid import NonlinearData, ProblemSpec, solve

PROBES = np.array([[1.5], [2.0], [3.0]])


def values(alpha: float, radius: float, h: float):
    ring = RingDomain(WholeSpace(1, radius), Ball((0.0,), 1.0))
    prob = ProblemSpec(ring, FracParams(alpha, 1), NonlinearData(zero_nonlinearity(), 0.0, 1.0))
    _, out = solve(prob, h)
    return out.field(PROBES)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--h", type=float, default=1 / 64)
    args = ap.parse_args()
    radii = [4.0, 8.0, 16.0, 32.0, 64.0]
    ref = values(args.alpha, 2 * radii[-1], args.h)
    print(f"alpha = {args.alpha}, h = {args.h:g}; reference box radius {2 * radii[-1]:g}")
    for R in radii:
        v = values(args.alpha, R, args.h)
        print(f"  R = {R:5.1f}  u(1.5, 2, 3) = {np.round(v, 5)}  max change vs reference {np.max(np.abs(v - ref)):.2e}")
