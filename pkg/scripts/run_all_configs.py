"""Run every shipped config through the CLI and tabulate exit codes."""

import argparse
import sys
import time
from pathlib import Path

import yaml

from fracstar.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run(out_root: Path):
    rows = []
    for cfg in sorted((ROOT / "configs").glob("*.yaml")):
        sub = yaml.safe_load(cfg.read_text())["subcommand"]
        t0 = time.perf_counter()
        code = main([sub, "--config", str(cfg), "--out", str(out_root / cfg.stem)])
        rows.append((cfg.stem, sub, code, time.perf_counter() - t0))
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "out")
    args = ap.parse_args()
    rows = run(args.out)
    for name, sub, code, el in rows:
        print(f"{name:28s} {sub:12s} exit {code}  {el:6.2f} s")
    sys.exit(0)
