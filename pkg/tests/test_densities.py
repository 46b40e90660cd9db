"""Benchmark density catalogue: mass, consistency, and sampler determinism."""

import numpy as np
import pytest

from tvfold.densities import get_density, registry
from tvfold.metrics import integrate

ALL_IDS = [d.id for d in registry()]


def test_registry_shape():
    assert ALL_IDS == [f"s{i}" for i in range(1, len(ALL_IDS) + 1)]
    assert len(ALL_IDS) >= 7
    with pytest.raises(ValueError):
        get_density("nope")


@pytest.mark.parametrize("did", ALL_IDS)
def test_pdf_integrates_to_one(did):
    d = get_density(did)
    lo, hi = d.effective_support(1e-10)
    mass = integrate(lambda x: np.maximum(d.pdf(x), 0.0), lo, hi,
                     breakpoints=d.quad_breakpoints())
    assert mass == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("did", ALL_IDS)
def test_cdf_matches_pdf_integral(did):
    # integrate between bulk quantiles: heavy tails (s5) would make a naive
    # full-window quadrature miss the central spike entirely
    d = get_density(did)
    if d.quantile is not None:
        lo = float(d.quantile(np.array([0.05]))[0])
        probes = [float(d.quantile(np.array([q]))[0]) for q in (0.25, 0.5, 0.9)]
    else:
        w0, w1 = d.effective_support(1e-10)
        lo = w0
        probes = [w0 + q * (w1 - w0) for q in (0.25, 0.5, 0.9)]
    for x in probes:
        want = integrate(lambda t: np.maximum(d.pdf(t), 0.0), lo, x,
                         breakpoints=d.quad_breakpoints())
        got = float(d.cdf(np.array([x]))[0] - d.cdf(np.array([lo]))[0])
        assert got == pytest.approx(want, abs=1e-6)


@pytest.mark.parametrize("did", ALL_IDS)
def test_sampler_reproducible_and_in_support(did):
    d = get_density(did)
    a = d.sample(500, np.random.SeedSequence(123))
    b = d.sample(500, np.random.SeedSequence(123))
    c = d.sample(500, np.random.SeedSequence(124))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    lo, hi = d.support
    assert np.all(a >= lo) and np.all(a <= hi)


@pytest.mark.parametrize("did", ALL_IDS)
def test_sample_distribution_matches_cdf(did):
    # Kolmogorov-Smirnov style sanity at a generous threshold
    d = get_density(did)
    x = np.sort(d.sample(4000, np.random.SeedSequence(7)))
    ecdf = np.arange(1, x.size + 1) / x.size
    gap = np.max(np.abs(ecdf - d.cdf(x)))
    assert gap < 0.035  # ~1.36/sqrt(n) is 0.0215; allow slack


def test_uniform_exact_histogram():
    d = get_density("s1")
    assert d.support == (0.0, 1.0)
    assert d._as_plain_histogram() is not None
    assert d.pdf(np.array([0.5]))[0] == 1.0
    assert d.pdf(np.array([1.5]))[0] == 0.0


def test_sample_size_validation():
    with pytest.raises(ValueError):
        get_density("s1").sample(0, np.random.SeedSequence(1))
