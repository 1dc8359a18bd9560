"""Run the inequality harness over several seeds and summarize every check family.

Measured families (the ones with unnamed constants) are reported as the
largest observed lhs/rhs ratio, asserted ones as pass/fail counts.

    python3 scripts/suite_sweep.py --seeds 0 1 2 3 --plot-data sweep_plot.json
"""

import argparse
import json
from collections import defaultdict

from bernoulli_decomp.verify import SuiteConfig, run_inequality_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--suite", default="default")
    ap.add_argument("--plot-data")
    args = ap.parse_args()
    counts = defaultdict(lambda: [0, 0])
    ratios = defaultdict(list)
    plot = defaultdict(list)
    for seed in args.seeds:
        rep = run_inequality_suite(SuiteConfig(suite=args.suite, seed=seed))
        for r in rep.results:
            if r.status == "measured":
                if r.rhs > 0:
                    ratios[r.name].append(r.lhs / r.rhs)
            else:
                counts[r.name][r.failed] += 1
        for name, pts in rep.plot_data().items():
            plot[name].extend(pts)
    print("asserted checks (pass / fail):")
    for name in sorted(counts):
        print(f"  {name:<32}{counts[name][0]:>6}{counts[name][1]:>6}")
    print("measured ratios lhs/rhs (max, median):")
    for name in sorted(ratios):
        vals = sorted(ratios[name])
        print(f"  {name:<32}{vals[-1]:>10.4f}{vals[len(vals) // 2]:>10.4f}  n={len(vals)}")
    if args.plot_data:
        with open(args.plot_data, "w") as fh:
            json.dump(plot, fh)


if __name__ == "__main__":
    main()
