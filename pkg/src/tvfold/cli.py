"""Command-line interface.

Subcommands: ``simulate`` (one Monte Carlo cell), ``run-table`` (a grid of
cells to CSV), ``compare`` (paired log2 risk ratios to CSV), ``check``
(property suites with a pass/fail exit code) and ``select`` (one selection
run on a file of data points, JSON report out).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .checks import SUITES, run_suite
from .harness import (
    COMPARE_COLUMNS,
    TABLE_COLUMNS,
    ExperimentConfig,
    _fmt,
    compare,
    empirical_risk,
    run_table,
)
from .metrics import DEFAULT_QUAD, QuadratureConfig
from .robust import TestConfig
from .vfold import family_for, select_fast, select_naive

_CELL_FIELDS = ("density", "family", "n", "V", "thetas", "statistic",
                "methods", "replications", "loss", "seed", "final",
                "support", "workers", "bins", "bandwidths")
_TUPLE_FIELDS = ("V", "thetas", "methods", "bins", "bandwidths")


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="tvfold", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--quad-tol", type=float, default=None,
                       help="absolute quadrature tolerance (default 1e-8)")
        p.add_argument("--out", default=None,
                       help="output path (default: stdout)")

    def cell_flags(p, many: bool):
        p.add_argument("--config", default=None,
                       help="JSON file with experiment settings; explicit "
                            "flags override its entries")
        p.add_argument("--density", default=None, help="density id, e.g. s1")
        p.add_argument("--family", default=None, choices=("R", "K", "KR"))
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--V", type=int, nargs="+" if many else None, default=None)
        p.add_argument("--theta", dest="thetas", type=float,
                       nargs="+" if many else None, default=None)
        p.add_argument("--test", dest="statistic", default=None,
                       choices=("birge", "baraud"))
        p.add_argument("--reps", dest="replications", type=int, default=None)
        p.add_argument("--loss", default=None, choices=("h2", "l1", "l2"))
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--final", default=None, choices=("refit", "average"))
        p.add_argument("--support", default=None, choices=("sample", "density"),
                       help="histogram support policy for simulated data")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--selector", default="fast", choices=("fast", "naive"))

    p = sub.add_parser("simulate", help="Monte Carlo risk of one cell")
    cell_flags(p, many=False)
    p.add_argument("--method", default="tvf", choices=("tvf", "klvf", "lsvf"))
    common(p)

    p = sub.add_parser("run-table", help="grid of cells, CSV out")
    cell_flags(p, many=True)
    p.add_argument("--methods", nargs="+", default=None,
                   choices=("tvf", "klvf", "lsvf"))
    p.add_argument("--external", default=None,
                   help="CSV of externally computed rows to merge")
    common(p)

    p = sub.add_parser("compare", help="paired log2 risk ratios, CSV out")
    cell_flags(p, many=True)
    p.add_argument("--methods", nargs="+", default=None,
                   choices=("tvf", "klvf", "lsvf"))
    p.add_argument("--pairs", nargs="+", default=("tvf:klvf", "tvf:lsvf"),
                   help="method pairs as a:b")
    common(p)

    p = sub.add_parser("check", help="run a property suite; exit 0 iff all pass")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))

    p = sub.add_parser("select", help="one selection run on user data")
    p.add_argument("--input", required=True,
                   help="text file with one real number per line")
    p.add_argument("--family", default="R", choices=("R", "K", "KR"))
    p.add_argument("--V", type=int, default=5)
    p.add_argument("--test", dest="statistic", default="birge",
                   choices=("birge", "baraud"))
    p.add_argument("--theta", type=float, default=0.25)
    p.add_argument("--mode", default="fast", choices=("fast", "naive"))
    p.add_argument("--final", default="average", choices=("refit", "average"))
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--warm-start", default="lsvf", choices=("lsvf", "none"),
                   help="'none' starts the pruned search at the first index")
    common(p)
    return top


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _load_config(path: str | None):
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _one_experiment(entry: dict, args) -> ExperimentConfig:
    """Config-file entry + command-line overrides -> ExperimentConfig."""
    merged = {}
    for key in _CELL_FIELDS:
        cli_val = getattr(args, key, None)
        val = cli_val if cli_val is not None else entry.get(key)
        if val is None:
            continue
        if key in _TUPLE_FIELDS and not isinstance(val, tuple):
            val = tuple(val) if isinstance(val, (list, np.ndarray)) else (val,)
        merged[key] = val
    return ExperimentConfig(**merged)


def _experiment_list(args) -> list[ExperimentConfig]:
    raw = _load_config(args.config)
    if isinstance(raw, dict) and "configs" in raw:
        raw = raw["configs"]
    entries = raw if isinstance(raw, list) else [raw]
    return [_one_experiment(e, args) for e in entries]


def _quad(args) -> QuadratureConfig:
    if args.quad_tol is None:
        return DEFAULT_QUAD
    return QuadratureConfig(abs_tol=args.quad_tol)


def _emit_json(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if out is None:
        print(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _emit_rows(rows: list[dict], columns, out: str | None) -> None:
    # run_table/compare already wrote the file when out is a path
    if out is not None:
        return
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])


# ---------------------------------------------------------------------------
# handlers
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    raw = _load_config(args.config)
    if not isinstance(raw, dict):
        raise ValueError("simulate takes a single config object, not a list")
    cfg = _one_experiment(raw, args)
    rep = empirical_risk(cfg, method=args.method, selector=args.selector,
                         quad=_quad(args))
    report = {
        "density": rep.density, "family": rep.family, "method": rep.method,
        "V": rep.V, "theta": rep.theta, "test": rep.statistic, "n": rep.n,
        "replications": rep.replications, "loss": rep.loss, "seed": rep.seed,
        "mean_risk": rep.mean_risk, "mc_stderr": rep.mc_stderr,
        "labels": list(rep.labels),
        "selected_counts": rep.selected.tolist(),
        "losses": rep.losses.tolist(),
    }
    _emit_json(report, args.out)
    return 0


def _cmd_run_table(args) -> int:
    rows = run_table(_experiment_list(args), args.out,
                     external=args.external, selector=args.selector,
                     quad=_quad(args))
    _emit_rows(rows, TABLE_COLUMNS, args.out)
    return 0


def _cmd_compare(args) -> int:
    pairs = []
    for spec in args.pairs:
        a, sep, b = spec.partition(":")
        if not sep or not a or not b:
            raise ValueError(f"--pairs entries look like a:b, got {spec!r}")
        pairs.append((a, b))
    rows = compare(_experiment_list(args), args.out, pairs=tuple(pairs),
                   selector=args.selector, quad=_quad(args))
    _emit_rows(rows, COMPARE_COLUMNS, args.out)
    return 0


def _cmd_check(args) -> int:
    results = run_suite(args.suite)
    for r in results:
        print(r)
    return 0 if all(r.passed for r in results) else 1


def _cmd_select(args) -> int:
    pts = np.atleast_1d(np.loadtxt(args.input, dtype=float)).ravel()
    if pts.size < 2:
        raise ValueError("need at least two data points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("input contains non-finite values")
    lo, hi = float(pts.min()), float(pts.max())
    if lo == hi:
        raise ValueError("all data points are identical")
    pad = 1e-3 * (hi - lo)  # user data: range padded by 0.1% per side
    family = family_for(args.family, pts.size, (lo - pad, hi + pad))
    cfg = TestConfig(statistic=args.statistic, theta=args.theta)
    pick = select_fast if args.mode == "fast" else select_naive
    kwargs = dict(cfg=cfg, seed=args.seed, quad=_quad(args), final=args.final)
    if args.mode == "fast" and args.warm_start == "none":
        kwargs["warm_start"] = 0
    res = pick(family, pts, args.V, **kwargs)
    report = {
        "chosen": res.chosen,
        "chosen_label": res.chosen_label,
        "labels": list(res.labels),
        "criterion": {res.labels[k]: v for k, v in sorted(res.criteria.items())},
        "telemetry": {
            "mode": res.method,
            "tests_performed": res.tests_performed,
            "degenerate_pairs": res.degenerate_pairs,
            "floored_evaluations": res.floored_evaluations,
            "complete_members": int(np.sum(res.complete)),
            "warm_start": res.warm_start,
        },
        "n": pts.size, "V": args.V,
        "test": args.statistic, "theta": args.theta, "seed": args.seed,
        "support": [lo - pad, hi + pad], "final": args.final,
        "estimate": json.loads(res.estimate.to_json()),
    }
    _emit_json(report, args.out)
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "run-table": _cmd_run_table,
    "compare": _cmd_compare,
    "check": _cmd_check,
    "select": _cmd_select,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"tvfold: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
