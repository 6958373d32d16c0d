"""Run every Monte-Carlo design and write its tables under one directory.

Usage: python3 scripts/run_monte_carlo.py [--out results] [--seed 20240601] [--workers 1]
       [--experiments A,B,C,Shapes,Stochastic,Overlap]

Each design goes to ``<out>/<experiment>/`` with its manifest. Critical values
are cached under ``<out>/cv_cache`` and shared across designs with equal T.
"""
import argparse
import sys
import time
from pathlib import Path

from techbubble import cli
from techbubble.harness import EXPERIMENTS


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--experiments", default=",".join(EXPERIMENTS))
    args = ap.parse_args()
    root = Path(args.out)
    cache = root / "cv_cache"
    for exp in [e.strip() for e in args.experiments.split(",") if e.strip()]:
        t0 = time.perf_counter()
        code = cli.main(["mc", "--experiment", exp, "--seed", str(args.seed),
                         "--workers", str(args.workers), "--cv-cache", str(cache),
                         "--out", str(root / exp)])
        if code:
            sys.exit(code)
        print(f"{exp:<10} {time.perf_counter() - t0:6.1f}s  -> {root / exp / f'mc_{exp}.csv'}")


if __name__ == "__main__":
    main()
