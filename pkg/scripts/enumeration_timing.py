"""Time exact enumeration against the number of sign coordinates, next to Monte Carlo.

    python3 scripts/enumeration_timing.py --points 16 --max-coords 22
"""

import argparse
import time

import numpy as np

from bernoulli_decomp.core import PointSet
from bernoulli_decomp.supremum import bernoulli_sup_exact, bernoulli_sup_mc


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=16)
    ap.add_argument("--max-coords", type=int, default=20)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'coords':>7}{'exact':>12}{'sec':>8}{'mc':>12}{'stderr':>10}{'sec':>8}")
    for d in range(4, args.max_coords + 1, 2):
        T = PointSet.from_matrix(rng.normal(size=(args.points, d)))
        t0 = time.perf_counter()
        ex = bernoulli_sup_exact(T).value
        t1 = time.perf_counter()
        mc = bernoulli_sup_mc(T, samples=args.samples, seed=args.seed)
        t2 = time.perf_counter()
        print(f"{d:>7}{ex:>12.5f}{t1 - t0:>8.2f}{mc.value:>12.5f}{mc.stderr:>10.5f}{t2 - t1:>8.2f}")


if __name__ == "__main__":
    main()
