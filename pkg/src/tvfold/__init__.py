"""Test-based V-fold cross-validation for density estimation.

Selects among density-estimation procedures (regular histograms, Gaussian
kernels, or both) by running robust pairwise tests on held-out folds and
minimizing the resulting dispersion criterion, with classical KL / least-
squares V-fold baselines and a Monte Carlo harness for risk studies.
"""

from .checks import SUITES, CheckResult, run_suite
from .densities import BenchmarkDensity, get_density, registry
from .estimators import (
    DensityEstimate,
    average_estimates,
    bandwidth_grid,
    bin_grid,
    fit_histogram,
    fit_kernel,
    l2_norm_sq,
    normalize_pi,
)
from .harness import (
    DEFAULT_THETAS,
    ExperimentConfig,
    RiskReport,
    UpsilonSummary,
    compare,
    empirical_risk,
    histogram_risk_bound,
    kernel_risk_bound,
    log2_risk_ratio,
    loss_value,
    run_table,
    theta_stability_ratio,
    upsilon_ratio,
)
from .metrics import (
    DEFAULT_QUAD,
    QuadratureConfig,
    hellinger_affinity,
    hellinger_sq,
    integrate,
    l1_distance,
    l2_sq_distance,
)
from .robust import (
    DEGENERATE_AFFINITY,
    TestConfig,
    TestOutcome,
    baraud_statistic,
    birge_statistic,
    run_test,
)
from .vfold import (
    ClassicalResult,
    EstimatorFamily,
    PartialFits,
    SelectionResult,
    SplitScheme,
    combined_family,
    dispersion,
    family_for,
    final_estimator,
    fit_partials,
    histogram_family,
    kernel_family,
    klvf_criterion,
    lsvf_criterion,
    make_splits,
    select_classical,
    select_fast,
    select_naive,
    tvf_criterion,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkDensity", "CheckResult", "ClassicalResult", "DEFAULT_QUAD",
    "DEFAULT_THETAS", "DEGENERATE_AFFINITY", "DensityEstimate",
    "EstimatorFamily", "ExperimentConfig", "PartialFits", "QuadratureConfig",
    "RiskReport", "SUITES", "SelectionResult", "SplitScheme", "TestConfig",
    "UpsilonSummary",
    "TestOutcome", "average_estimates", "bandwidth_grid", "baraud_statistic",
    "bin_grid", "birge_statistic", "combined_family", "compare", "dispersion",
    "empirical_risk", "family_for", "final_estimator", "fit_histogram",
    "fit_kernel", "fit_partials", "get_density", "hellinger_affinity",
    "hellinger_sq", "histogram_family", "histogram_risk_bound", "integrate",
    "kernel_family", "kernel_risk_bound", "klvf_criterion", "l1_distance",
    "l2_norm_sq", "l2_sq_distance", "log2_risk_ratio", "loss_value",
    "lsvf_criterion", "make_splits", "normalize_pi", "registry", "run_suite",
    "run_table", "run_test", "select_classical", "select_fast", "select_naive",
    "theta_stability_ratio", "tvf_criterion", "upsilon_ratio",
]
