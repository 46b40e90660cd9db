"""Robust pairwise tests between candidate densities.

Two statistics are provided. The "birge" statistic aggregates log-ratios of
mixed square roots: with omega = arccos(affinity(t, u)),

    T = sum_i log[ (sin(omega(1-theta)) sqrt(t) + sin(omega theta) sqrt(u))
                 / (sin(omega(1-theta)) sqrt(u) + sin(omega theta) sqrt(t)) ](X_i)

As theta -> 0 this approaches half the log-likelihood ratio, so the induced
test coincides with the likelihood-ratio test in the limit. The "baraud"
statistic couples an empirical term with an exact integral against the
mid-density r = (t+u)/2:

    T = 0.5 [ mean_i (sqrt(t) - sqrt(u))/sqrt(r) (X_i)
            + int (sqrt(t) - sqrt(u)) sqrt(r) ]

Both are antisymmetric in (t, u) and are compared against a threshold z; the
first operand wins when T > z. Pairs at affinity >= 1 - 1e-12 carry no
information and are rejected as degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metrics
from .metrics import DEFAULT_QUAD, QuadratureConfig

__all__ = [
    "DEGENERATE_AFFINITY",
    "DegeneratePairError",
    "TestConfig",
    "TestOutcome",
    "birge_statistic",
    "baraud_statistic",
    "run_test",
]

DEGENERATE_AFFINITY = 1.0 - 1e-12


class DegeneratePairError(ValueError):
    """The two candidates are numerically indistinguishable."""


@dataclass(frozen=True)
class TestConfig:
    """Which statistic to run and with what smoothing/flooring."""

    __test__ = False  # "Test" prefix is domain vocabulary, not a pytest class

    statistic: str = "birge"
    theta: float = 0.25
    floor: float = 1e-300

    def __post_init__(self) -> None:
        if self.statistic not in ("birge", "baraud"):
            raise ValueError(f"unknown statistic {self.statistic!r}")
        if not (0.0 < self.theta < 0.5):
            raise ValueError("theta must lie strictly between 0 and 1/2")
        if not (self.floor > 0.0):
            raise ValueError("floor must be positive")


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    winner: str           # "first" | "second"
    statistic: float
    threshold: float


def _check_affinity(rho: float) -> float:
    if rho >= DEGENERATE_AFFINITY:
        raise DegeneratePairError(f"affinity {rho} leaves nothing to test")
    return min(max(rho, 0.0), 1.0)


def _sqrt_vals(density, points: np.ndarray, floor: float) -> np.ndarray:
    return np.sqrt(np.maximum(density.pdf(points), floor))


def mixed_log_terms(sqrt_t: np.ndarray, sqrt_u: np.ndarray, omega: float,
                    theta: float) -> np.ndarray:
    """Per-observation terms of the birge statistic, given sqrt evaluations."""
    a = np.sin(omega * (1.0 - theta))
    b = np.sin(omega * theta)
    return np.log((a * sqrt_t + b * sqrt_u) / (a * sqrt_u + b * sqrt_t))


def birge_statistic(t, u, points, theta: float = 0.25, *,
                    affinity: float | None = None, floor: float = 1e-300,
                    quad: QuadratureConfig | None = None) -> float:
    """Mixed-root log-ratio statistic over the observations ``points``.

    ``affinity`` short-circuits the Hellinger affinity computation when the
    caller already holds it. Raises DegeneratePairError on near-identical
    pairs, where omega collapses and the statistic is vacuous.
    """
    if not (0.0 < theta < 0.5):
        raise ValueError("theta must lie strictly between 0 and 1/2")
    rho = metrics.hellinger_affinity(t, u, quad) if affinity is None else affinity
    rho = _check_affinity(rho)
    omega = np.arccos(rho)
    points = np.asarray(points, dtype=float)
    terms = mixed_log_terms(_sqrt_vals(t, points, floor),
                            _sqrt_vals(u, points, floor), omega, theta)
    return float(np.sum(terms))


def baraud_integral(t, u, quad: QuadratureConfig | None = None) -> float:
    """int (sqrt t - sqrt u) sqrt((t+u)/2); exact for histogram pairs."""
    quad = quad or DEFAULT_QUAD
    ht = metrics._as_histogram(t)
    hu = metrics._as_histogram(u)
    if ht is not None and hu is not None:
        widths, vt, vu = metrics._merged_histograms(ht, hu)
        return float(np.sum(widths * (np.sqrt(vt) - np.sqrt(vu))
                            * np.sqrt(0.5 * (vt + vu))))
    lo, hi = metrics._union_window(t, u, quad.tail_quantile)
    hints = np.concatenate([metrics._edge_hints(t), metrics._edge_hints(u)])

    def integrand(x):
        pt = np.maximum(t.pdf(x), 0.0)
        pu = np.maximum(u.pdf(x), 0.0)
        return (np.sqrt(pt) - np.sqrt(pu)) * np.sqrt(0.5 * (pt + pu))

    return metrics.integrate(integrand, lo, hi, quad, breakpoints=hints)


def baraud_statistic(t, u, points, *, affinity: float | None = None,
                     floor: float = 1e-300,
                     quad: QuadratureConfig | None = None) -> float:
    """Empirical-plus-integral statistic against the mid-density (t+u)/2.

    Subject to the same degenerate-pair rejection as birge_statistic.
    """
    rho = metrics.hellinger_affinity(t, u, quad) if affinity is None else affinity
    _check_affinity(rho)
    points = np.asarray(points, dtype=float)
    vt = np.maximum(t.pdf(points), floor)
    vu = np.maximum(u.pdf(points), floor)
    emp = np.mean((np.sqrt(vt) - np.sqrt(vu)) / np.sqrt(0.5 * (vt + vu)))
    return float(0.5 * (emp + baraud_integral(t, u, quad)))


def run_test(t, u, z: float, cfg: TestConfig, points, *,
             indices: tuple[int, int] | None = None,
             affinity: float | None = None,
             quad: QuadratureConfig | None = None) -> TestOutcome:
    """Threshold test between two candidates.

    The first operand wins when the statistic exceeds ``z``, the second when
    it falls below. An exact tie goes to the operand with the smaller family
    index (``indices``), defaulting to the first operand.
    """
    if cfg.statistic == "birge":
        stat = birge_statistic(t, u, points, cfg.theta, affinity=affinity,
                               floor=cfg.floor, quad=quad)
    else:
        stat = baraud_statistic(t, u, points, affinity=affinity,
                                floor=cfg.floor, quad=quad)
    if stat > z:
        winner = "first"
    elif stat < z:
        winner = "second"
    else:
        if indices is not None and indices[1] < indices[0]:
            winner = "second"
        else:
            winner = "first"
    return TestOutcome(winner=winner, statistic=stat, threshold=float(z))
