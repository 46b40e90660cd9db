"""Executable correctness checks, shared by the CLI and the acceptance tests.

Each check runs a self-contained randomized experiment at a fixed seed and
returns a :class:`CheckResult` with a pass flag and a human-readable summary
of what was measured. The CLI groups them into suites (``oracle``,
``invariants``, ``bounds``); the two expensive benchmark-reproduction checks
stand alone and are exercised by the acceptance test suite.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import metrics
from .densities import get_density
from .estimators import DensityEstimate, average_estimates, fit_histogram, fit_kernel
from .harness import ExperimentConfig, empirical_risk, kernel_risk_bound, histogram_risk_bound
from .robust import (
    TestConfig,
    baraud_integral,
    baraud_statistic,
    birge_statistic,
    mixed_log_terms,
)
from .vfold import (
    EstimatorFamily,
    fit_partials,
    histogram_family,
    kernel_family,
    make_splits,
    select_fast,
    select_naive,
)

_MASTER = 20260818  # every check derives its streams from this


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __str__(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.detail}"


def _seq(tag: int, i: int = 0, j: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(_MASTER, spawn_key=(tag, i, j))


def _sample_support(sample: np.ndarray) -> tuple[float, float]:
    return float(np.min(sample)), float(np.max(sample))


# ---------------------------------------------------------------------------
# selector equivalence
# ---------------------------------------------------------------------------

def check_oracle_equivalence(instances: int = 100,
                             time_budget: float = 120.0) -> CheckResult:
    """Pruned and exhaustive selectors agree on every random instance.

    Requires the identical chosen index everywhere, matching criterion values
    at the chosen index to 1e-12, never more tests from the pruned selector,
    and strictly fewer on at least 90% of instances, all inside the time
    budget.
    """
    rng = np.random.default_rng(_seq(1))
    ids = ("s1", "s3", "s7")
    identical = strict = 0
    worst_gap = 0.0
    t0 = time.perf_counter()
    for i in range(instances):
        n = int(rng.choice((100, 200)))
        V = int(rng.choice((2, 5)))
        K = int(rng.integers(8, 26))
        density = get_density(ids[int(rng.integers(len(ids)))])
        sample = density.sample(n, _seq(1, i, 0))
        family = histogram_family(n, _sample_support(sample),
                                  bins=tuple(range(1, K + 1)))
        splits = make_splits(n, V, _seq(1, i, 1))
        cfg = TestConfig(statistic="birge", theta=0.25)
        naive = select_naive(family, sample, cfg=cfg, splits=splits)
        fast = select_fast(family, sample, cfg=cfg, splits=splits)
        if fast.chosen == naive.chosen:
            identical += 1
            worst_gap = max(worst_gap, abs(fast.criteria[fast.chosen]
                                           - naive.criteria[naive.chosen]))
        if fast.tests_performed > naive.tests_performed:
            return CheckResult(
                "oracle-equivalence", False,
                f"instance {i}: pruned selector ran {fast.tests_performed} "
                f"tests vs {naive.tests_performed} exhaustive")
        if fast.tests_performed < naive.tests_performed:
            strict += 1
    elapsed = time.perf_counter() - t0
    ok = (identical == instances and strict >= 0.9 * instances
          and worst_gap <= 1e-12 and elapsed < time_budget)
    return CheckResult(
        "oracle-equivalence", ok,
        f"{identical}/{instances} identical picks, {strict} with strictly "
        f"fewer tests, criterion gap ≤ {worst_gap:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# benchmark reproduction
# ---------------------------------------------------------------------------

# frozen benchmark: uniform-truth Hellinger risks (×10³) for regular-histogram
# selection at n=500, theta=1/4, zero weights, by number of folds
UNIFORM_HIST_RISKS = {2: 2.9, 5: 4.31, 10: 6.18, 20: 9.39}


def check_reference_risks(replications: int = 1000, rtol: float = 0.25,
                          seed: int = _MASTER) -> CheckResult:
    """Reproduce the benchmark uniform/histogram risk column.

    Monte Carlo mean Hellinger risk must land within ``rtol`` of the
    frozen value for every V.
    """
    rows = []
    ok = True
    for V, want in UNIFORM_HIST_RISKS.items():
        cfg = ExperimentConfig(density="s1", family="R", n=500, V=(V,),
                               thetas=(0.25,), statistic="birge",
                               replications=replications, seed=seed)
        rep = empirical_risk(cfg)
        got = 1e3 * rep.mean_risk
        inside = abs(got - want) <= rtol * want
        ok &= inside
        rows.append(f"V={V}: {got:.2f} (want {want}, "
                    f"band ±{100 * rtol:.0f}%{'' if inside else ' MISS'})")
    return CheckResult("uniform-histogram-risks", ok, "; ".join(rows))


def check_method_comparison(replications: int = 100) -> CheckResult:
    """Test-based selection tracks the classical selectors on kernels.

    On uniform data with the kernel family at n=500, V=5: the test-based
    Hellinger risk must be within a factor 1.5 of the better classical
    criterion, and the two test statistics within a factor 1.3 of each other.
    """
    base = dict(density="s1", family="K", n=500, V=(5,), thetas=(0.25,),
                replications=replications, seed=_MASTER)
    risks = {}
    for name, kw in (("tvf-birge", dict(statistic="birge")),
                     ("tvf-baraud", dict(statistic="baraud"))):
        risks[name] = empirical_risk(ExperimentConfig(**base, **kw)).mean_risk
    for method in ("klvf", "lsvf"):
        risks[method] = empirical_risk(ExperimentConfig(**base), method).mean_risk
    classical = min(risks["klvf"], risks["lsvf"])
    r_vs_classical = risks["tvf-birge"] / classical
    r_statistics = (max(risks["tvf-birge"], risks["tvf-baraud"])
                    / min(risks["tvf-birge"], risks["tvf-baraud"]))
    ok = (1 / 1.5 <= r_vs_classical <= 1.5) and (r_statistics <= 1.3)
    fmt = ", ".join(f"{k}={1e3 * v:.2f}" for k, v in risks.items())
    return CheckResult(
        "method-comparison", ok,
        f"1e3*risks: {fmt}; tvf/classical={r_vs_classical:.3f} "
        f"(need [0.67,1.5]), statistic ratio={r_statistics:.3f} (need ≤1.3)")


# ---------------------------------------------------------------------------
# structural invariants
# ---------------------------------------------------------------------------

def _random_family(rng, n: int, sample: np.ndarray, kernel: bool) -> EstimatorFamily:
    if kernel:
        K = int(rng.integers(4, 9))
        ladder = np.geomspace(0.05, 0.5, K)
        return kernel_family(n, bandwidths=tuple(float(w) for w in ladder))
    K = int(rng.integers(5, 15))
    return histogram_family(n, _sample_support(sample),
                            bins=tuple(range(1, K + 1)))


def check_control1(runs: int = 50) -> CheckResult:
    """Every pairwise Hellinger gap is covered by a dispersion.

    After an exhaustive selection run, each tested pair (l, m) in each fold
    must satisfy h(l, m) ≤ max(D_j(l), D_j(m)) + 1e-10. Pairs too close for
    the test to distinguish carry no winner; for those the gap itself must
    sit below the degeneracy threshold.
    """
    rng = np.random.default_rng(_seq(3))
    ids = ("s1", "s3", "s7")
    violations = 0
    pairs_seen = 0
    for i in range(runs):
        n = int(rng.choice((60, 120)))
        V = int(rng.choice((2, 3, 5)))
        density = get_density(ids[int(rng.integers(len(ids)))])
        sample = density.sample(n, _seq(3, i, 0))
        family = _random_family(rng, n, sample, kernel=(i % 5 == 4))
        splits = make_splits(n, V, _seq(3, i, 1))
        cfg = TestConfig(statistic=("birge", "baraud")[i % 2], theta=0.25)
        res = select_naive(family, sample, cfg=cfg, splits=splits,
                           keep_pair_tests=True)
        disp = np.sqrt(res.lower_bounds)
        for (j, l, m), (winner, h2) in res.pair_tests.items():
            pairs_seen += 1
            h = math.sqrt(max(h2, 0.0))
            if winner is None:
                if h2 > 1e-12:
                    violations += 1
            elif h > max(disp[j, l], disp[j, m]) + 1e-10:
                violations += 1
    return CheckResult(
        "dispersion-control", violations == 0,
        f"{violations} violations over {pairs_seen} tested pairs in {runs} runs")


def check_additive_identity(configs: int = 20) -> CheckResult:
    """Full-sample fits equal the average of their fold fits pointwise.

    Holds exactly for histogram and kernel procedures whenever V divides n;
    checked on a 1000-point grid at 1e-12.
    """
    rng = np.random.default_rng(_seq(4))
    ids = ("s1", "s3", "s7")
    worst = 0.0
    for i in range(configs):
        V = int(rng.choice((2, 4, 5)))
        n = V * int(rng.integers(15, 50))
        density = get_density(ids[int(rng.integers(len(ids)))])
        sample = density.sample(n, _seq(4, i, 0))
        splits = make_splits(n, V, _seq(4, i, 1))
        lo, hi = _sample_support(sample)
        m = int(rng.integers(1, 20))
        w = float(rng.uniform(0.05, 0.4))
        for family, grid in (
            (histogram_family(n, (lo, hi), bins=(m,)),
             np.linspace(lo, hi, 1000)),
            (kernel_family(n, bandwidths=(w,)),
             np.linspace(lo - 4 * w, hi + 4 * w, 1000)),
        ):
            full = family.fit_one(0, sample)
            parts = fit_partials(family, sample, splits)
            avg = average_estimates([parts.estimates[j][0] for j in range(V)])
            gap = float(np.max(np.abs(full.pdf(grid) - avg.pdf(grid))))
            worst = max(worst, gap)
    return CheckResult(
        "additive-identity", worst <= 1e-12,
        f"max pointwise gap {worst:.3e} over {configs} configs "
        "(histogram and kernel)")


def check_loss_convexity(configs: int = 100) -> CheckResult:
    """Averaging fold fits never hurts: h²(s, avg) ≤ mean_j h²(s, fit_j) + 1e-6."""
    rng = np.random.default_rng(_seq(5))
    ids = ("s1", "s3", "s7")
    worst = -math.inf
    for i in range(configs):
        n = int(rng.integers(40, 121))
        V = int(rng.choice((2, 3, 5)))
        density = get_density(ids[int(rng.integers(len(ids)))])
        sample = density.sample(n, _seq(5, i, 0))
        splits = make_splits(n, V, _seq(5, i, 1))
        family = _random_family(rng, n, sample, kernel=(i % 5 < 2))
        k = int(rng.integers(family.size))
        parts = [fit_partials(family, sample, splits).estimates[j][k]
                 for j in range(V)]
        avg_loss = metrics.hellinger_sq(density, average_estimates(parts))
        mean_loss = float(np.mean([metrics.hellinger_sq(density, p) for p in parts]))
        worst = max(worst, avg_loss - mean_loss)
    return CheckResult(
        "averaging-loss", worst <= 1e-6,
        f"max h²(avg) − mean h² = {worst:.3e} over {configs} configs")


def check_weight_shift(instances: int = 20) -> CheckResult:
    """Adding a constant to all member weights changes nothing.

    Thresholds are weight differences, so a uniform shift of 3.7 must leave
    every test outcome, every dispersion (to 1e-12) and the chosen index
    intact.
    """
    rng = np.random.default_rng(_seq(6))
    ids = ("s1", "s3", "s7")
    shift = 3.7
    for i in range(instances):
        n = int(rng.integers(60, 151))
        V = int(rng.choice((2, 3, 5)))
        density = get_density(ids[int(rng.integers(len(ids)))])
        sample = density.sample(n, _seq(6, i, 0))
        family = _random_family(rng, n, sample, kernel=False)
        base = family.with_weights(rng.uniform(0.0, 1.0, family.size))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # shifted weights trip the mass warning
            shifted = base.with_weights(np.asarray(base.weights) + shift)
        splits = make_splits(n, V, _seq(6, i, 1))
        cfg = TestConfig(statistic=("birge", "baraud")[i % 2], theta=0.25)
        a = select_naive(base, sample, cfg=cfg, splits=splits, keep_pair_tests=True)
        b = select_naive(shifted, sample, cfg=cfg, splits=splits, keep_pair_tests=True)
        if a.chosen != b.chosen:
            return CheckResult("weight-shift", False,
                               f"instance {i}: chosen index moved "
                               f"{a.chosen} → {b.chosen}")
        wins_a = {k: v[0] for k, v in a.pair_tests.items()}
        wins_b = {k: v[0] for k, v in b.pair_tests.items()}
        if wins_a != wins_b:
            return CheckResult("weight-shift", False,
                               f"instance {i}: some test outcome flipped")
        gap = float(np.max(np.abs(np.sqrt(a.lower_bounds) - np.sqrt(b.lower_bounds))))
        if gap > 1e-12:
            return CheckResult("weight-shift", False,
                               f"instance {i}: dispersion moved by {gap:.2e}")
    return CheckResult("weight-shift", True,
                       f"{instances} instances invariant under +{shift} shift")


# ---------------------------------------------------------------------------
# theoretical bounds
# ---------------------------------------------------------------------------

def check_histogram_bound(replications: int = 1000) -> CheckResult:
    """Fixed-bin histogram risk on uniform data respects (m−1)/(2n).

    Uses the truth's own support so the bias term vanishes; the Monte Carlo
    mean must not exceed the bound by more than 3 standard errors.
    """
    density = get_density("s1")
    n = 500
    rows = []
    ok = True
    for m in (5, 20):
        losses = np.empty(replications)
        for i in range(replications):
            sample = density.sample(n, _seq(7, m, i))
            est = fit_histogram(sample, m, density.support)
            losses[i] = metrics.hellinger_sq(density, est)
        mean = float(losses.mean())
        se = float(losses.std(ddof=1) / math.sqrt(replications))
        bound = histogram_risk_bound(m, n, density)
        good = mean <= bound + 3 * se
        ok &= good
        rows.append(f"m={m}: risk {mean:.5f} ≤ {bound:.5f} + 3·{se:.5f}"
                    f"{'' if good else ' VIOLATED'}")
    return CheckResult("histogram-risk-bound", ok, "; ".join(rows))


def _unit_interval_sqrt_mass(est: DensityEstimate, nodes: int = 8193) -> float:
    # Composite Simpson of sqrt(pdf) over [0,1]; the integrand is smooth for
    # the bandwidths used here, so a fixed grid is plenty at 8193 nodes.
    x = np.linspace(0.0, 1.0, nodes)
    y = np.sqrt(est.pdf(x))
    h = x[1] - x[0]
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-2:2].sum()))


def check_kernel_bound(replications: int = 500) -> CheckResult:
    """Fixed-bandwidth Gaussian-kernel risk on uniform data respects its bound."""
    density = get_density("s1")
    n = 500
    rows = []
    ok = True
    for w in (0.02, 0.1):
        losses = np.empty(replications)
        for i in range(replications):
            sample = density.sample(n, _seq(8, int(w * 1000), i))
            est = fit_kernel(sample, w)
            # truth is flat at 1 on [0,1]: affinity = ∫₀¹ sqrt(est)
            losses[i] = 1.0 - _unit_interval_sqrt_mass(est)
        mean = float(losses.mean())
        bound = kernel_risk_bound(w, n)
        good = mean <= bound
        ok &= good
        rows.append(f"w={w}: risk {mean:.5f} ≤ bound {bound:.5f}"
                    f"{'' if good else ' VIOLATED'}")
    return CheckResult("kernel-risk-bound", ok, "; ".join(rows))


def check_test_level(replications: int = 20000, n: int = 50) -> CheckResult:
    """Wrong-winner rate of both statistics obeys the exponential level bound.

    Data come from a uniform density equal to the test's first operand; the
    alternative is a fixed two-bin histogram. The frequency of the alternative
    winning must stay below exp(−n(1−2θ)²h²) + 3 MC standard errors.
    """
    theta = 0.25
    t = DensityEstimate(kind="histogram", breakpoints=(0.0, 1.0), heights=(1.0,))
    u = DensityEstimate(kind="histogram", breakpoints=(0.0, 0.5, 1.0),
                        heights=(1.5, 0.5))
    rho = metrics.hellinger_affinity(t, u)
    h2 = 1.0 - rho
    bound = math.exp(-n * (1.0 - 2.0 * theta) ** 2 * h2)

    # both densities are flat on each half of [0,1], so a sample enters each
    # statistic only through its count of points below 1/2
    cells = np.array([0.25, 0.75])
    sq_t, sq_u = np.sqrt(t.pdf(cells)), np.sqrt(u.pdf(cells))
    birge_cell = mixed_log_terms(sq_t, sq_u, math.acos(rho), theta)
    r = 0.5 * (t.pdf(cells) + u.pdf(cells))
    baraud_cell = (sq_t - sq_u) / np.sqrt(r)
    baraud_int = baraud_integral(t, u)

    rng = np.random.Generator(np.random.Philox(_seq(9)))
    low = rng.binomial(n, 0.5, size=replications)
    high = n - low
    stats = {
        "birge": low * birge_cell[0] + high * birge_cell[1],
        "baraud": 0.5 * ((low * baraud_cell[0] + high * baraud_cell[1]) / n
                         + baraud_int),
    }

    # spot-check the shortcut against the full statistic on raw samples
    spot = np.random.Generator(np.random.Philox(_seq(9, 1)))
    for _ in range(25):
        pts = spot.random(n)
        nl = int(np.sum(pts < 0.5))
        direct_b = birge_statistic(t, u, pts, theta, affinity=rho)
        direct_d = baraud_statistic(t, u, pts, affinity=rho)
        short_b = nl * birge_cell[0] + (n - nl) * birge_cell[1]
        short_d = 0.5 * ((nl * baraud_cell[0] + (n - nl) * baraud_cell[1]) / n
                         + baraud_int)
        if abs(direct_b - short_b) > 1e-9 or abs(direct_d - short_d) > 1e-6:
            return CheckResult("test-level", False,
                               "cell shortcut disagrees with direct statistics")

    rows = []
    ok = True
    for name, T in stats.items():
        wrong = float(np.mean(T < 0.0))  # ties go to the first operand
        se = math.sqrt(max(wrong * (1.0 - wrong), 1e-12) / replications)
        good = wrong <= bound + 3 * se
        ok &= good
        rows.append(f"{name}: wrong rate {wrong:.4f} ≤ {bound:.4f} + 3·{se:.4f}"
                    f"{'' if good else ' VIOLATED'}")
    return CheckResult("test-level", ok, "; ".join(rows))


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

SUITES = {
    "oracle": (check_oracle_equivalence,),
    "invariants": (check_control1, check_additive_identity,
                   check_loss_convexity, check_weight_shift),
    "bounds": (check_histogram_bound, check_kernel_bound, check_test_level),
}


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; pick from {sorted(SUITES)}")
    return [fn() for fn in SUITES[name]]
