"""Monte Carlo risk estimation and method comparison for V-fold selectors.

A cell of the experiment grid is (density, family, method, V, theta): draw
``replications`` samples, run the selection, build the final estimate and
average the loss against the truth. Per-replication seeds derive from the
master seed and the replication index alone, so results do not depend on
scheduling and runs are reproducible bit for bit.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .densities import BenchmarkDensity, get_density
from .estimators import DensityEstimate
from .metrics import DEFAULT_QUAD, QuadratureConfig
from .robust import TestConfig
from .vfold import (EstimatorFamily, family_for, histogram_family,
                    kernel_family, make_splits, select_classical, select_fast,
                    select_naive)

__all__ = [
    "ExperimentConfig",
    "RiskReport",
    "empirical_risk",
    "loss_value",
    "log2_risk_ratio",
    "theta_stability_ratio",
    "UpsilonSummary",
    "upsilon_ratio",
    "histogram_risk_bound",
    "kernel_risk_bound",
    "run_table",
    "compare",
    "TABLE_COLUMNS",
    "COMPARE_COLUMNS",
]

DEFAULT_THETAS = (1 / 16, 1 / 8, 1 / 4, 3 / 8, 7 / 16)
TABLE_COLUMNS = ("density", "family", "method", "V", "theta", "test", "n",
                 "reps", "loss", "mean_risk", "mc_stderr", "seed")
COMPARE_COLUMNS = ("density", "V", "family", "method_pair", "w_value")

_METHODS = ("tvf", "klvf", "lsvf")
_LOSSES = ("h2", "l1", "l2")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment cell family: a density/estimator-family pairing with
    the V values, thetas and methods to sweep."""

    density: str = "s1"
    family: str = "R"
    n: int = 500
    V: tuple[int, ...] = (5,)
    thetas: tuple[float, ...] = (0.25,)
    statistic: str = "birge"
    methods: tuple[str, ...] = ("tvf",)
    replications: int = 1000
    loss: str = "h2"
    seed: int = 0
    final: str = "average"
    support: str = "sample"   # histogram support: the sample range, or the
    workers: int = 1          # truth's own ("density")
    bins: tuple[int, ...] | None = None          # override the histogram grid
    bandwidths: tuple[float, ...] | None = None  # override the kernel ladder

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if any(v < 2 for v in self.V):
            raise ValueError("every V must be at least 2")
        if self.loss not in _LOSSES:
            raise ValueError(f"loss must be one of {_LOSSES}")
        if any(m not in _METHODS for m in self.methods):
            raise ValueError(f"methods must be among {_METHODS}")
        if self.family not in ("R", "K", "KR"):
            raise ValueError("family must be R, K or KR")
        if not all(0.0 < t < 0.5 for t in self.thetas):
            raise ValueError("thetas must lie in (0, 1/2)")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.support not in ("sample", "density"):
            raise ValueError("support policy must be 'sample' or 'density'")


@dataclass
class RiskReport:
    """Monte Carlo risk of one cell: mean loss, its standard error, the raw
    per-replication losses and the histogram of selected indices."""

    density: str
    family: str
    method: str
    V: int
    theta: float | None
    statistic: str | None
    n: int
    replications: int
    loss: str
    seed: int
    mean_risk: float
    mc_stderr: float
    losses: np.ndarray
    selected: np.ndarray
    labels: tuple[str, ...]


def _family_support(density: BenchmarkDensity,
                    quad: QuadratureConfig) -> tuple[float, float]:
    return density.effective_support(quad.tail_quantile)


def _build_family(cfg: ExperimentConfig, density: BenchmarkDensity,
                  quad: QuadratureConfig,
                  sample: np.ndarray | None = None) -> EstimatorFamily:
    # Histogram supports follow the config policy.  "sample" anchors each
    # replication's histograms to its own data range, so even a perfectly
    # chosen histogram keeps the ~1/n truncation loss that a real fit pays;
    # "density" uses the truth's declared support instead.
    if cfg.support == "sample" and sample is not None and sample.size:
        lo, hi = float(np.min(sample)), float(np.max(sample))
        if lo == hi:  # degenerate one-point range; keep the fit well defined
            lo, hi = lo - 1e-9, hi + 1e-9
        support = (lo, hi)
    else:
        support = _family_support(density, quad)
    if cfg.family == "R" and cfg.bins is not None:
        return histogram_family(cfg.n, support, bins=cfg.bins)
    if cfg.family == "K" and cfg.bandwidths is not None:
        return kernel_family(cfg.n, bandwidths=cfg.bandwidths)
    return family_for(cfg.family, cfg.n, support)


def loss_value(truth, estimate, kind: str = "h2",
               quad: QuadratureConfig | None = None) -> float:
    """Loss of an estimate against the truth: squared Hellinger ("h2"),
    L1 ("l1") or squared L2 ("l2"). Exact for histogram-on-histogram pairs,
    quadrature otherwise."""
    if kind == "h2":
        return metrics.hellinger_sq(truth, estimate, quad)
    if kind == "l1":
        return metrics.l1_distance(truth, estimate, quad)
    if kind == "l2":
        return metrics.l2_sq_distance(truth, estimate, quad)
    raise ValueError(f"unknown loss kind {kind!r}")


def _one_replication(cfg: ExperimentConfig, method: str, V: int,
                     theta: float, i: int, selector: str,
                     quad: QuadratureConfig) -> tuple[int, float, int]:
    density = get_density(cfg.density)
    sample = density.sample(cfg.n, np.random.SeedSequence(cfg.seed, spawn_key=(i, 0)))
    family = _build_family(cfg, density, quad, sample)
    splits = make_splits(cfg.n, V, np.random.SeedSequence(cfg.seed, spawn_key=(i, 1)))
    if method == "tvf":
        tcfg = TestConfig(statistic=cfg.statistic, theta=theta)
        pick = select_naive if selector == "naive" else select_fast
        res = pick(family, sample, cfg=tcfg, splits=splits, quad=quad,
                   final=cfg.final)
    else:
        res = select_classical(family, sample, splits=splits, quad=quad,
                               contrast="kl" if method == "klvf" else "ls",
                               final=cfg.final)
    loss = loss_value(density, res.estimate, cfg.loss, quad)
    return i, loss, res.chosen


def empirical_risk(cfg: ExperimentConfig, method: str = "tvf", *,
                   V: int | None = None, theta: float | None = None,
                   selector: str = "fast",
                   quad: QuadratureConfig | None = None) -> RiskReport:
    """Monte Carlo risk of one cell. When the config sweeps several V or
    theta values, the cell must be pinned with the keyword arguments."""
    if method not in _METHODS:
        raise ValueError(f"unknown method {method!r}")
    if selector not in ("fast", "naive"):
        raise ValueError("selector must be 'fast' or 'naive'")
    if V is None:
        if len(cfg.V) != 1:
            raise ValueError("config sweeps several V values; pass V=...")
        V = cfg.V[0]
    if theta is None:
        if len(cfg.thetas) != 1:
            raise ValueError("config sweeps several thetas; pass theta=...")
        theta = cfg.thetas[0]
    quad = quad or DEFAULT_QUAD

    reps = cfg.replications
    losses = np.empty(reps)
    chosen = np.empty(reps, dtype=np.intp)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futs = [pool.submit(_one_replication, cfg, method, V, theta, i,
                                selector, quad) for i in range(reps)]
            for fut in futs:
                i, loss, pick = _wrap_replication(fut.result, cfg, -1)
                losses[i] = loss
                chosen[i] = pick
    else:
        for i in range(reps):
            _, loss, pick = _wrap_replication(
                lambda: _one_replication(cfg, method, V, theta, i, selector, quad),
                cfg, i)
            losses[i] = loss
            chosen[i] = pick

    family = _build_family(cfg, get_density(cfg.density), quad)
    mean = float(np.mean(losses))
    stderr = 0.0 if reps < 2 else float(np.std(losses, ddof=1) / math.sqrt(reps))
    return RiskReport(
        density=cfg.density, family=cfg.family, method=method, V=V,
        theta=theta if method == "tvf" else None,
        statistic=cfg.statistic if method == "tvf" else None,
        n=cfg.n, replications=reps, loss=cfg.loss, seed=cfg.seed,
        mean_risk=mean, mc_stderr=stderr, losses=losses,
        selected=np.bincount(chosen, minlength=family.size),
        labels=family.labels,
    )


def _wrap_replication(call, cfg: ExperimentConfig, i: int):
    try:
        return call()
    except Exception as exc:  # noqa: BLE001 - reraise with provenance
        which = f"replication {i}" if i >= 0 else "a replication"
        raise RuntimeError(
            f"{which} failed (master seed {cfg.seed}, density {cfg.density}, "
            f"family {cfg.family}): {exc}") from exc


# ---------------------------------------------------------------------------
# comparison metrics
# ---------------------------------------------------------------------------

def _risk_of(report_or_value) -> float:
    value = getattr(report_or_value, "mean_risk", report_or_value)
    return float(value)


def log2_risk_ratio(report_a, report_b) -> float:
    """log2 of the risk ratio. Computed as a difference of logs so swapping
    the arguments negates the result exactly."""
    a, b = _risk_of(report_a), _risk_of(report_b)
    if a <= 0.0 or b <= 0.0:
        raise ValueError("degenerate comparison: nonpositive risk")
    return math.log2(a) - math.log2(b)


def theta_stability_ratio(risks) -> float:
    """Worst-case (over densities) ratio min-over-theta / max-over-theta.

    Accepts a mapping density -> risks over the theta grid, or a bare
    sequence for a single density.
    """
    if hasattr(risks, "values"):
        groups = list(risks.values())
    else:
        groups = [risks]
    if not groups:
        raise ValueError("no risks given")
    worst = math.inf
    for g in groups:
        arr = np.asarray([_risk_of(r) for r in g], dtype=float)
        if arr.size == 0:
            raise ValueError("empty risk group")
        hi = float(np.max(arr))
        if hi <= 0.0:
            raise ValueError("degenerate comparison: nonpositive risk")
        worst = min(worst, float(np.min(arr)) / hi)
    return worst


@dataclass(frozen=True)
class UpsilonSummary:
    """Per-density ratio inf-over-theta(first risks) / (second risk), with
    its supremum and infimum across densities."""

    values: dict[str, float]
    sup: float
    inf: float


def upsilon_ratio(birge_risks, baraud_risk) -> UpsilonSummary:
    """Ratio of the best theta-tuned risk of the first statistic to the
    second statistic's risk, per density and summarised across densities.

    Accepts mappings density -> (sequence of risks, risk); bare inputs are
    treated as a single unnamed density.
    """
    if not hasattr(birge_risks, "items"):
        birge_risks = {"*": birge_risks}
        baraud_risk = {"*": baraud_risk}
    values = {}
    for name, group in birge_risks.items():
        denom = _risk_of(baraud_risk[name])
        if denom <= 0.0:
            raise ValueError("degenerate comparison: nonpositive risk")
        best = min(_risk_of(r) for r in group)
        values[name] = best / denom
    if not values:
        raise ValueError("no densities given")
    return UpsilonSummary(values=values,
                          sup=max(values.values()), inf=min(values.values()))


# ---------------------------------------------------------------------------
# theoretical bounds
# ---------------------------------------------------------------------------

def histogram_risk_bound(m: int, n: int,
                         density: BenchmarkDensity | None = None,
                         quad: QuadratureConfig | None = None) -> float:
    """Risk bound for an m-bin regular histogram on n points: squared
    Hellinger bias of the bin-averaged truth plus (m-1)/(2n). With no
    density given the bias is taken as zero (uniform truth)."""
    if m < 1 or n < 1:
        raise ValueError("need m >= 1 and n >= 1")
    bias = 0.0
    if density is not None:
        quad = quad or DEFAULT_QUAD
        lo, hi = density.effective_support(quad.tail_quantile)
        edges = np.linspace(lo, hi, m + 1)
        if density.cdf is not None:
            mass = np.diff(density.cdf(edges))
        else:
            mass = np.array([metrics.integrate(density.pdf, edges[b], edges[b + 1], quad)
                             for b in range(m)])
        heights = np.maximum(mass, 0.0) / np.diff(edges)
        flat = DensityEstimate(kind="histogram", breakpoints=edges, heights=heights)
        bias = metrics.hellinger_sq(density, flat, quad)
    return bias + (m - 1) / (2.0 * n)


def _gaussian_c_k(quad: QuadratureConfig) -> float:
    def integrand(x):
        return np.maximum(1.0, x * x) * np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)

    return metrics.integrate(integrand, -40.0, 40.0, quad,
                             breakpoints=[-1.0, 1.0])


def kernel_risk_bound(w: float, n: int, L: float = 0.5, phi=None,
                      c_k: float | None = None, k_sup: float | None = None,
                      c_shape: float = 1.0,
                      quad: QuadratureConfig | None = None) -> float:
    """Hellinger risk bound for a bandwidth-w Gaussian kernel estimate of a
    density supported on an interval of half-length L with continuity
    modulus of sqrt(s) bounded by phi: 2 c_K phi(w)^2 + 2 L ||K||_inf /(n w)
    + c_shape / n. Kernel constants default to the Gaussian values computed
    by quadrature."""
    if w <= 0.0 or n < 1:
        raise ValueError("need w > 0 and n >= 1")
    quad = quad or DEFAULT_QUAD
    if phi is None:
        phi = lambda eta: math.sqrt(2.0 * eta)  # noqa: E731
    if c_k is None:
        c_k = _gaussian_c_k(quad)
    if k_sup is None:
        k_sup = 1.0 / math.sqrt(2.0 * math.pi)
    return 2.0 * c_k * phi(w) ** 2 + 2.0 * L * k_sup / (n * w) + c_shape / n


# ---------------------------------------------------------------------------
# CSV emitters
# ---------------------------------------------------------------------------

def _cells(cfg: ExperimentConfig):
    for V in cfg.V:
        for method in cfg.methods:
            if method == "tvf":
                for theta in cfg.thetas:
                    yield method, V, theta
            else:
                yield method, V, None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def run_table(configs, path=None, *, external=None, selector: str = "fast",
              quad: QuadratureConfig | None = None) -> list[dict]:
    """Run every cell of every config and emit one CSV row per cell.

    Rows from an ``external`` CSV (competitor methods computed elsewhere)
    are appended verbatim after the computed rows; they must carry at least
    the same columns. Returns the rows as dictionaries; writes the CSV to
    ``path`` when given. Same seeds, same bytes.
    """
    rows = []
    for cfg in configs:
        for method, V, theta in _cells(cfg):
            rep = empirical_risk(cfg, method, V=V, theta=theta or cfg.thetas[0],
                                 selector=selector, quad=quad)
            rows.append({
                "density": cfg.density, "family": cfg.family, "method": method,
                "V": V, "theta": theta, "test": cfg.statistic if method == "tvf" else None,
                "n": cfg.n, "reps": cfg.replications, "loss": cfg.loss,
                "mean_risk": rep.mean_risk, "mc_stderr": rep.mc_stderr,
                "seed": cfg.seed,
            })
    if external is not None:
        with open(external, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(TABLE_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"external table lacks columns: {sorted(missing)}")
            for raw in reader:
                rows.append({c: raw[c] for c in TABLE_COLUMNS})
    if path is not None:
        _write_csv(path, TABLE_COLUMNS, rows)
    return rows


def compare(configs, path=None, *,
            pairs=(("tvf", "klvf"), ("tvf", "lsvf")),
            selector: str = "fast",
            quad: QuadratureConfig | None = None) -> list[dict]:
    """Head-to-head log2 risk ratios per (density, V): one CSV row per
    config cell and method pair, ready for boxplotting."""
    rows = []
    wanted = sorted({m for p in pairs for m in p})
    for cfg in configs:
        for V in cfg.V:
            reports = {m: empirical_risk(cfg, m, V=V, theta=cfg.thetas[0],
                                         selector=selector, quad=quad)
                       for m in wanted}
            for a, b in pairs:
                rows.append({
                    "density": cfg.density, "V": V, "family": cfg.family,
                    "method_pair": f"{a}/{b}",
                    "w_value": log2_risk_ratio(reports[a], reports[b]),
                })
    if path is not None:
        _write_csv(path, COMPARE_COLUMNS, rows)
    return rows


def _write_csv(path, columns, rows) -> None:
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write table to {path!r}: {exc}") from exc
    with fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
