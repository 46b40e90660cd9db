"""Robust pairwise test statistics.

The worked-example values below were derived by hand for the pair
t = Uniform[0,1], u = Uniform[0,1/2] at theta = 1/4: the affinity is
1/sqrt(2), omega = pi/4, and each log term has a closed form.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvfold.estimators import DensityEstimate
from tvfold.metrics import hellinger_affinity
from tvfold.robust import (
    DEGENERATE_AFFINITY,
    DegeneratePairError,
    TestConfig,
    TestOutcome,
    baraud_integral,
    baraud_statistic,
    birge_statistic,
    mixed_log_terms,
    run_test,
)


def uniform(lo, hi):
    return DensityEstimate(kind="histogram", breakpoints=(lo, hi),
                           heights=(1.0 / (hi - lo),))


T_FULL = uniform(0.0, 1.0)
U_HALF = uniform(0.0, 0.5)


# ---------------------------------------------------------------------------
# config / outcome plumbing
# ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        TestConfig(statistic="wald")
    with pytest.raises(ValueError):
        TestConfig(theta=0.5)
    with pytest.raises(ValueError):
        TestConfig(theta=0.0)
    with pytest.raises(ValueError):
        TestConfig(floor=0.0)
    assert TestConfig().statistic == "birge"


# ---------------------------------------------------------------------------
# the smooth log-ratio statistic
# ---------------------------------------------------------------------------

def test_birge_worked_example_terms():
    # X=0.25 lies under both densities, X=0.75 only under t
    stat_lo = birge_statistic(T_FULL, U_HALF, np.array([0.25]), 0.25)
    stat_hi = birge_statistic(T_FULL, U_HALF, np.array([0.75]), 0.25)
    assert stat_lo == pytest.approx(-0.16515880499602056, abs=1e-12)
    assert stat_hi == pytest.approx(1.0465323920155634, abs=1e-12)
    # the one-sided term is log(sin(3 pi/16) / sin(pi/16))
    want = math.log(math.sin(3 * math.pi / 16) / math.sin(math.pi / 16))
    assert stat_hi == pytest.approx(want, abs=1e-14)
    # statistics add over observations
    both = birge_statistic(T_FULL, U_HALF, np.array([0.25, 0.75]), 0.25)
    assert both == pytest.approx(stat_lo + stat_hi, abs=1e-12)


def test_birge_antisymmetric_in_operands():
    pts = np.array([0.1, 0.3, 0.45, 0.8])
    a = birge_statistic(T_FULL, U_HALF, pts, 0.25)
    b = birge_statistic(U_HALF, T_FULL, pts, 0.25)
    assert a == pytest.approx(-b, abs=1e-12)


def test_birge_small_theta_approaches_half_loglik_ratio():
    pts = np.array([0.2, 0.4])
    got = birge_statistic(T_FULL, U_HALF, pts, 1e-9)
    want = 0.5 * np.sum(np.log(T_FULL.pdf(pts) / U_HALF.pdf(pts)))
    assert got == pytest.approx(want, abs=1e-6)


def test_mixed_log_terms_matches_direct_formula():
    rho = hellinger_affinity(T_FULL, U_HALF)
    omega, theta = math.acos(rho), 0.25
    pts = np.array([0.25])
    terms = mixed_log_terms(np.sqrt(T_FULL.pdf(pts)), np.sqrt(U_HALF.pdf(pts)),
                            omega, theta)
    a, b = math.sin(omega * (1 - theta)), math.sin(omega * theta)
    want = math.log((a * 1.0 + b * math.sqrt(2.0))
                    / (a * math.sqrt(2.0) + b * 1.0))
    assert terms[0] == pytest.approx(want, abs=1e-15)


def test_degenerate_pair_rejected():
    with pytest.raises(DegeneratePairError):
        birge_statistic(T_FULL, T_FULL, np.array([0.5]), 0.25)
    with pytest.raises(DegeneratePairError):
        baraud_statistic(T_FULL, T_FULL, np.array([0.5]))
    assert 0.0 < DEGENERATE_AFFINITY < 1.0


def test_floor_keeps_statistic_finite():
    # points outside u's support hit the floor instead of log(0)
    got = birge_statistic(T_FULL, U_HALF, np.array([0.9]), 0.25)
    assert np.isfinite(got)


# ---------------------------------------------------------------------------
# the variance-normalized statistic
# ---------------------------------------------------------------------------

def test_baraud_worked_example():
    # at X=0.25: (sqrt t - sqrt u)/sqrt((t+u)/2) = (1 - sqrt 2)/sqrt(1.5)
    emp = (1.0 - math.sqrt(2.0)) / math.sqrt(1.5)
    assert emp == pytest.approx(-0.3382039574515256, abs=1e-15)
    integral = baraud_integral(T_FULL, U_HALF)
    assert integral == pytest.approx(0.0999004225046296, abs=1e-12)
    got = baraud_statistic(T_FULL, U_HALF, np.array([0.25]))
    assert got == pytest.approx(0.5 * (emp + integral), abs=1e-12)
    assert got == pytest.approx(-0.119151767473448, abs=1e-12)


def test_baraud_antisymmetric_in_operands():
    pts = np.array([0.05, 0.3, 0.6])
    a = baraud_statistic(T_FULL, U_HALF, pts)
    b = baraud_statistic(U_HALF, T_FULL, pts)
    assert a == pytest.approx(-b, abs=1e-12)


def test_baraud_integral_exact_for_histograms():
    # hand value: .5(1-sqrt2)sqrt(1.5) + .5*sqrt(.5)
    want = 0.5 * (1 - math.sqrt(2)) * math.sqrt(1.5) + 0.5 * math.sqrt(0.5)
    assert baraud_integral(T_FULL, U_HALF) == pytest.approx(want, abs=1e-14)


# ---------------------------------------------------------------------------
# the threshold test
# ---------------------------------------------------------------------------

def test_run_test_winner_directions():
    # data mass far right favors t (the full uniform)
    out = run_test(T_FULL, U_HALF, 0.0, TestConfig(), np.array([0.7, 0.8, 0.9]))
    assert isinstance(out, TestOutcome)
    assert out.winner == "first"
    assert out.statistic > 0.0
    # data packed under u favors u
    out = run_test(T_FULL, U_HALF, 0.0, TestConfig(), np.array([0.1, 0.2, 0.3]))
    assert out.winner == "second"


def test_run_test_threshold_shifts_decision():
    pts = np.array([0.7, 0.8, 0.9])
    stat = birge_statistic(T_FULL, U_HALF, pts, 0.25)
    assert run_test(T_FULL, U_HALF, stat + 1.0, TestConfig(), pts).winner == "second"
    assert run_test(T_FULL, U_HALF, stat - 1.0, TestConfig(), pts).winner == "first"


def test_run_test_tie_goes_to_smaller_index():
    pts = np.array([0.7])
    stat = birge_statistic(T_FULL, U_HALF, pts, 0.25)
    at_tie = run_test(T_FULL, U_HALF, stat, TestConfig(), pts, indices=(3, 1))
    assert at_tie.winner == "second"
    at_tie = run_test(T_FULL, U_HALF, stat, TestConfig(), pts, indices=(1, 3))
    assert at_tie.winner == "first"
    # without indices the first operand takes the tie
    assert run_test(T_FULL, U_HALF, stat, TestConfig(), pts).winner == "first"


def test_run_test_baraud_statistic_used():
    pts = np.array([0.25])
    out = run_test(T_FULL, U_HALF, 0.0, TestConfig(statistic="baraud"), pts)
    assert out.statistic == pytest.approx(-0.119151767473448, abs=1e-12)
    assert out.winner == "second"


@st.composite
def random_histograms(draw):
    k = draw(st.integers(min_value=2, max_value=5))
    h = np.asarray(draw(st.lists(st.floats(0.05, 4.0), min_size=k, max_size=k)))
    h = h / (h.sum() / k)
    return DensityEstimate(kind="histogram", breakpoints=np.linspace(0, 1, k + 1),
                           heights=h)


@given(random_histograms(), random_histograms(),
       st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20),
       st.sampled_from(["birge", "baraud"]))
@settings(max_examples=60, deadline=None)
def test_winner_consistent_with_statistic_sign(t, u, pts, kind):
    pts = np.array(pts)
    rho = hellinger_affinity(t, u)
    if rho >= DEGENERATE_AFFINITY:
        return
    out = run_test(t, u, 0.0, TestConfig(statistic=kind), pts)
    if out.statistic > 0:
        assert out.winner == "first"
    elif out.statistic < 0:
        assert out.winner == "second"
