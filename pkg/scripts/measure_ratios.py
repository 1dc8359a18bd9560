"""Run the decomposition pipeline on structured families and print the measured ratios.

    python3 scripts/measure_ratios.py --seed 0 --max-level 4 --out ratios.json
"""

import argparse
import json
import time

import numpy as np

from bernoulli_decomp.instances import ellipsoid_net, l1_vertices, lacunary_fan, two_distance_adversarial
from bernoulli_decomp.decomposer import bernoulli_conjecture_pipeline


def families(rng):
    for d in (2, 4, 8, 12):
        yield f"l1_vertices_d{d}", l1_vertices(d)
    for n in (8, 16, 32):
        yield f"ellipsoid_n{n}", ellipsoid_net(rng, n, np.exp(-0.5 * np.arange(5)))
    for n in (8, 16):
        yield f"two_distance_n{n}", two_distance_adversarial(rng, n, 2, 3)
    yield "lacunary_fan", lacunary_fan(12, 2.0, 3)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-level", type=int, default=4)
    ap.add_argument("--out")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    rows = []
    print(f"{'family':<20}{'|T|':>5}{'b(T)':>10}{'l1/b':>9}{'g2(T2)/b':>10}{'exact':>7}{'sec':>7}")
    for name, T in families(rng):
        t0 = time.perf_counter()
        dec = bernoulli_conjecture_pipeline(T, max_level=args.max_level, seed=args.seed)
        dt = time.perf_counter() - t0
        row = {"family": name, "points": len(T), "b": dec.info["b"], "b_method": dec.info["b_method"],
               "l1_sup_over_b": dec.info["l1_sup_over_b"], "gamma2_T2_over_b": dec.info["gamma2_T2_over_b"],
               "exact": dec.exact(), "seconds": dt}
        rows.append(row)
        print(f"{name:<20}{len(T):>5}{row['b']:>10.4f}{row['l1_sup_over_b']:>9.3f}"
              f"{row['gamma2_T2_over_b']:>10.3f}{str(row['exact']):>7}{dt:>7.2f}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
