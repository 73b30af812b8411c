"""Walk length and truncation statistics of walk-on-spheres versus alpha and step fraction."""

import argparse

from fracstar.geometry import Ball, RingDomain
from fracstar.kernels import FracParams
from fracstar.wos_mc import WalkConfig, estimate_solution

RING = RingDomain(Ball((0.0, 0.0), 1.0), Ball((0.0, 0.0), 0.3))

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--max-steps", type=int, default=10000)
    args = ap.parse_args()
    print(f"{'alpha':>6} {'gamma':>6} {'mean steps':>11} {'truncated':>10} {'u(0.6, 0)':>10} {'stderr':>8}")
    for a in (0.5, 1.0, 1.5, 1.9):
        for frac in (0.25, 0.5, 0.9):
            cfg = WalkConfig(step_fraction=frac, n_samples=args.n, max_steps=args.max_steps)
            e = estimate_solution([0.6, 0.0], RING, 0.0, 1.0, cfg=cfg, params=FracParams(a, 2))
            print(f"{a:6.2f} {frac:6.2f} {e.mean_steps:11.2f} {e.truncated_fraction:10.2e} {e.mean:10.4f} {e.stderr:8.4f}")
