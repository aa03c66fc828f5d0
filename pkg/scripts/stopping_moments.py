"""Moment growth of stopped sums under a first-passage rule.

Compares empirical ||S||_p with the curve implied by the fitted tail
exponents of the stopping time (anchored at p = 2).
"""
import argparse
import os

from randsum.mc_verifier import FirstPassage, stopping_time_experiment
from randsum.tail_core import GmrSpec, Normal, TwoPointPM1

SUMMANDS = {"pm1": TwoPointPM1, "normal": Normal, "gmr2": lambda: GmrSpec(2.0),
            "gmr1": lambda: GmrSpec(1.0)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--summand", choices=sorted(SUMMANDS), default="normal")
    ap.add_argument("--level", type=float, nargs="+", default=[2.0, 4.0, 8.0])
    ap.add_argument("--N", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    for level in args.level:
        res = stopping_time_experiment(FirstPassage(level), SUMMANDS[args.summand](),
                                       N=args.N, seed=args.seed)
        e = res.exponents
        print(f"level {level}: E eta = {res.A:.2f}, fitted a = {e.a:.3f}, "
              f"q = {e.q:.3f}, slope {res.slope:.3f} (1/q = {1 / e.q:.3f})")
        res.table.to_csv(os.path.join(args.out, f"stopping_{args.summand}_{level:g}.csv"))


if __name__ == "__main__":
    main()
