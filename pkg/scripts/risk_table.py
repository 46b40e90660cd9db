#!/usr/bin/env python3
"""Monte Carlo risk table across fold counts and densities.

Desk-scale by default (seconds); the full-scale table of the package
documentation is --densities s1 --n 500 --reps 1000, which takes minutes.

Example:
    python3 scripts/risk_table.py --densities s1 s3 --V 2 5 --reps 25
"""

import argparse
import csv
import sys

from tvfold.harness import TABLE_COLUMNS, ExperimentConfig, _fmt, run_table


def parse_args():
    p = argparse.ArgumentParser(description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--densities", nargs="+", default=["s1"],
                   help="benchmark density ids (s1..s7)")
    p.add_argument("--family", default="R", choices=("R", "K", "KR"))
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--V", type=int, nargs="+", default=[2, 5])
    p.add_argument("--theta", type=float, default=0.25)
    p.add_argument("--test", default="birge", choices=("birge", "baraud"))
    p.add_argument("--methods", nargs="+", default=["tvf"],
                   choices=("tvf", "klvf", "lsvf"))
    p.add_argument("--reps", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--support", default="sample", choices=("sample", "density"))
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    return p.parse_args()


def main():
    args = parse_args()
    configs = [
        ExperimentConfig(density=d, family=args.family, n=args.n,
                         V=tuple(args.V), thetas=(args.theta,),
                         statistic=args.test, methods=tuple(args.methods),
                         replications=args.reps, seed=args.seed,
                         support=args.support)
        for d in args.densities
    ]
    rows = run_table(configs, args.out)
    if args.out is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in TABLE_COLUMNS])


if __name__ == "__main__":
    main()
