"""Single-sum operator Q against simulated tails of normalised +-1 sums."""
import argparse

import numpy as np

from randsum.bound_engine import q_operator
from randsum.mc_verifier import simulate_normalized_sum_tail
from randsum.tail_core import TwoPointPM1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[1, 2, 5, 20, 100])
    ap.add_argument("--N", type=int, default=10 ** 7)
    ap.add_argument("--seed", type=int, default=1000)
    args = ap.parse_args()

    x = np.array([0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
    s = TwoPointPM1()
    Q, branch = q_operator(s.tail(), s.cumulant(), x)
    print("x      " + " ".join(f"{v:>9g}" for v in x))
    print("Q      " + " ".join(f"{v:>9.4g}" for v in Q))
    print("branch " + " ".join(f"{b:>9}" for b in branch))
    for i, n in enumerate(args.n):
        tail = simulate_normalized_sum_tail(s, n, x, args.N, args.seed + i, confidence=0.999)
        print(f"n={n:<4} " + " ".join(f"{v:>9.4g}" for v in tail.ci_high))


if __name__ == "__main__":
    main()
