"""Log-log slope of -log P(|S| > x) for geometric sums of G(m, r) summands.

The slope should approach 2M/(M+2), with (M, L) the exponent pair of the
summand.  One row per (m, A) combination.
"""
import argparse
import os

import numpy as np

from randsum.errors import InfeasibleError
from randsum.lower_bounds import geometric_lower_bound_mc, tail_exponent_slope
from randsum.reporting import Table
from randsum.tail_core import GmrSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=float, nargs="+", default=[1.5, 2.0, 3.0])
    ap.add_argument("--A", type=float, nargs="+", default=[4.0, 16.0])
    ap.add_argument("--N", type=int, default=10 ** 6)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    x = np.round(np.arange(2.0, 8.0 + 1e-9, 0.25), 12)
    rows = {k: [] for k in ("m", "A", "target", "slope", "x_max")}
    for m in args.m:
        for A in args.A:
            try:
                tail = geometric_lower_bound_mc(GmrSpec(m), A, x, args.N, seed=args.seed,
                                                drop_infeasible=True)
                slope = tail_exponent_slope(tail, x_min=2.0)
                xmax = float(tail.x.max())
            except InfeasibleError as exc:
                print(f"m={m}, A={A}: {exc}")
                slope, xmax = float("nan"), float("nan")
            M = min(m, 2.0)
            for k, v in zip(rows, (m, A, 2 * M / (M + 2), slope, xmax)):
                rows[k].append(v)
            print(f"m={m:<4} A={A:<5} slope {slope:.4f}  target {2 * M / (M + 2):.4f}")
    os.makedirs(args.out, exist_ok=True)
    Table(rows).to_csv(os.path.join(args.out, "exponent_slope.csv"))


if __name__ == "__main__":
    main()
