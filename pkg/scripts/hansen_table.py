"""Simulate null quantiles of Hansen's L_c statistic for m = 1..5 I(1) regressors.

Usage: python3 scripts/hansen_table.py [--n 1000] [--reps 20000] [--seed 2024]

Prints one row per m with the upper-tail quantiles used by
``techbubble.coint.HANSEN_LC_TABLE``.
"""
import argparse

import numpy as np

from techbubble.timeseries import RngStream

PROBS = (0.20, 0.10, 0.05, 0.025, 0.01, 0.001)


def lc_draw(gen, n, m):
    X = np.cumsum(gen.standard_normal((n, m)), axis=0)
    u = gen.standard_normal(n)
    Z = np.column_stack([np.ones(n), X])
    beta, *_ = np.linalg.lstsq(Z, u, rcond=None)
    e = u - Z @ beta
    S = np.cumsum(Z * e[:, None], axis=0)
    M = Z.T @ Z
    omega2 = e @ e / n
    return np.trace(np.linalg.solve(M, S.T @ S)) / (n * omega2)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--reps", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=2024)
    a = ap.parse_args()
    print("m," + ",".join(f"q{p}" for p in PROBS))
    for m in range(1, 6):
        gen = RngStream(a.seed, m).generator()
        draws = np.array([lc_draw(gen, a.n, m) for _ in range(a.reps)])
        q = np.quantile(draws, [1 - p for p in PROBS])
        print(f"{m}," + ",".join(f"{v:.3f}" for v in q))


if __name__ == "__main__":
    main()
