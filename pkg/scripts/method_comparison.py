#!/usr/bin/env python3
"""Head-to-head comparison of the dispersion selector with the classical
log and least-squares V-fold selectors, plus the two robust statistics
against each other.

Prints one log2 risk-ratio row per (density, V, pair); negative values
favour the first method. With --upsilon, also reports the per-density ratio
of the best theta-tuned risk of the first statistic to the risk of the
second. Desk-scale by default.

Example:
    python3 scripts/method_comparison.py --densities s1 --family K --reps 20
"""

import argparse

from tvfold.harness import (DEFAULT_THETAS, ExperimentConfig, compare,
                            empirical_risk, upsilon_ratio)


def parse_args():
    p = argparse.ArgumentParser(description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--densities", nargs="+", default=["s1"])
    p.add_argument("--family", default="K", choices=("R", "K", "KR"))
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--V", type=int, nargs="+", default=[5])
    p.add_argument("--theta", type=float, default=0.25)
    p.add_argument("--test", default="birge", choices=("birge", "baraud"))
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--upsilon", action="store_true",
                   help="also compare the theta-tuned first statistic "
                        "against the second statistic")
    p.add_argument("--out", default=None, help="CSV path for the ratio rows")
    return p.parse_args()


def build(args, d, **overrides):
    base = dict(density=d, family=args.family, n=args.n, V=tuple(args.V),
                thetas=(args.theta,), statistic=args.test,
                replications=args.reps, seed=args.seed)
    base.update(overrides)
    return ExperimentConfig(**base)


def main():
    args = parse_args()
    configs = [build(args, d) for d in args.densities]
    rows = compare(configs, args.out)
    for row in rows:
        print(f"{row['density']}  V={row['V']}  {row['method_pair']}: "
              f"log2 ratio = {row['w_value']:+.4f}")

    if args.upsilon:
        tuned, fixed = {}, {}
        for d in args.densities:
            swept = build(args, d, thetas=tuple(DEFAULT_THETAS),
                          statistic="birge")
            tuned[d] = [empirical_risk(swept, V=args.V[0], theta=t)
                        for t in DEFAULT_THETAS]
            other = build(args, d, statistic="baraud")
            fixed[d] = empirical_risk(other, V=args.V[0])
        summary = upsilon_ratio(tuned, fixed)
        for d, v in summary.values.items():
            print(f"{d}: best-theta birge / baraud = {v:.4f}")
        print(f"range over densities: [{summary.inf:.4f}, {summary.sup:.4f}]")


if __name__ == "__main__":
    main()
