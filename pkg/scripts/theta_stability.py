#!/usr/bin/env python3
"""Sensitivity of the dispersion selector to the test-sharpness parameter.

Sweeps theta over a grid for each density, prints the per-density risks and
the min/max risk ratio; a ratio near one means the choice of theta barely
matters. Desk-scale by default.

Example:
    python3 scripts/theta_stability.py --densities s1 s3 --reps 25
"""

import argparse

from tvfold.harness import (DEFAULT_THETAS, ExperimentConfig, empirical_risk,
                            theta_stability_ratio)


def parse_args():
    p = argparse.ArgumentParser(description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--densities", nargs="+", default=["s1", "s3"])
    p.add_argument("--family", default="R", choices=("R", "K", "KR"))
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--V", type=int, default=5)
    p.add_argument("--thetas", type=float, nargs="+", default=list(DEFAULT_THETAS))
    p.add_argument("--test", default="birge", choices=("birge", "baraud"))
    p.add_argument("--reps", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    return p.parse_args()


def main():
    args = parse_args()
    risks = {}
    for d in args.densities:
        cfg = ExperimentConfig(density=d, family=args.family, n=args.n,
                               V=(args.V,), thetas=tuple(args.thetas),
                               statistic=args.test, replications=args.reps,
                               seed=args.seed)
        reports = [empirical_risk(cfg, theta=t) for t in args.thetas]
        risks[d] = reports
        cells = ", ".join(f"theta={t:g}: {r.mean_risk:.5g}"
                          for t, r in zip(args.thetas, reports))
        print(f"{d}: {cells}")
    print(f"worst min/max risk ratio over densities: "
          f"{theta_stability_ratio(risks):.4f}")


if __name__ == "__main__":
    main()
