"""Fold splitting, families, the dispersion criterion, and both selectors."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvfold.densities import get_density
from tvfold.estimators import l2_norm_sq
from tvfold.metrics import hellinger_sq
from tvfold.robust import TestConfig
from tvfold.vfold import (
    EstimatorFamily,
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


def draw(n, key=0, density="s3"):
    return get_density(density).sample(n, np.random.SeedSequence(99, spawn_key=(key,)))


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def test_splits_partition_everything():
    s = make_splits(103, 5, 0)
    seen = np.concatenate(s.blocks)
    assert sorted(seen.tolist()) == list(range(103))
    sizes = sorted(len(b) for b in s.blocks)
    assert sizes == [20, 20, 21, 21, 21]  # remainder spread one per block


def test_splits_deterministic_in_seed():
    a = make_splits(40, 4, 7)
    b = make_splits(40, 4, 7)
    c = make_splits(40, 4, 8)
    for x, y in zip(a.blocks, b.blocks):
        np.testing.assert_array_equal(x, y)
    assert any(not np.array_equal(x, y) for x, y in zip(a.blocks, c.blocks))


def test_splits_validation():
    with pytest.raises(ValueError):
        make_splits(10, 1, 0)
    with pytest.raises(ValueError):
        make_splits(10, 11, 0)
    make_splits(10, 10, 0)  # V = n is legal, just discouraged


@given(st.integers(10, 200), st.integers(2, 10), st.integers(0, 2 ** 31))
@settings(max_examples=50, deadline=None)
def test_splits_property(n, V, seed):
    if V > n:
        return
    s = make_splits(n, V, seed)
    sizes = [len(b) for b in s.blocks]
    assert sum(sizes) == n
    assert max(sizes) - min(sizes) <= 1
    assert len(np.unique(np.concatenate(s.blocks))) == n


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

def test_histogram_family_default_grid():
    fam = histogram_family(500, (0.0, 1.0))
    assert fam.size == 81
    assert fam.labels[0] == "hist-1" and fam.labels[-1] == "hist-81"
    assert fam.kinds == ("histogram",) * 81


def test_kernel_family_default_grid():
    fam = kernel_family(500)
    assert fam.size == 38
    assert all(k == "kernel" for k in fam.kinds)


def test_combined_family_order():
    fam = combined_family(500, (0.0, 1.0))
    assert fam.size == 81 + 38
    assert fam.kinds[:81] == ("histogram",) * 81
    assert fam.kinds[81:] == ("kernel",) * 38
    assert family_for("KR", 500, (0.0, 1.0)).labels == fam.labels
    with pytest.raises(ValueError):
        family_for("X", 500, (0.0, 1.0))


def test_family_weights():
    fam = histogram_family(100, (0.0, 1.0), bins=(1, 2, 3))
    np.testing.assert_array_equal(fam.weights, [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        fam.with_weights([-0.1, 0.0, 0.0])
    with pytest.raises(ValueError):
        fam.with_weights([0.0, 0.0])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fam.with_weights([9.0, 9.0, 9.0])  # total test mass drops below 1/2
    assert any("mass" in str(w.message).lower() or "weight" in str(w.message).lower()
               for w in caught)


def test_fit_one_and_partials_shapes():
    fam = histogram_family(60, (0.0, 1.0), bins=(2, 4))
    sample = draw(60, density="s1")
    splits = make_splits(60, 3, 1)
    parts = fit_partials(fam, sample, splits)
    assert len(parts.estimates) == 3
    assert len(parts.estimates[0]) == 2
    # each partial is fitted on n - n/V points
    est = parts.estimates[1][1]
    total = np.sum(est.heights * np.diff(est.breakpoints))
    assert total == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_partials(fam, sample[:-1], splits)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_tvf_criterion_is_mean_square():
    d = np.array([0.1, 0.2, 0.3])
    assert tvf_criterion(d) == pytest.approx(np.mean(d ** 2), abs=1e-15)


def test_dispersion_reference_values():
    # two members, V=2: the loser of a fold's single test carries the
    # pair's Hellinger distance, the winner carries zero
    n = 80
    sample = draw(n, density="s1")
    fam = histogram_family(n, (0.0, 1.0), bins=(1, 7))
    splits = make_splits(n, 2, 5)
    parts = fit_partials(fam, sample, splits)
    cfg = TestConfig()
    for j in (0, 1):
        held_out = sample[splits.blocks[j]]
        d0 = dispersion(0, j, parts, cfg, validation=held_out)
        d1 = dispersion(1, j, parts, cfg, validation=held_out)
        assert (d0 == 0.0) != (d1 == 0.0)  # exactly one side loses
        h = np.sqrt(hellinger_sq(parts.estimates[j][0], parts.estimates[j][1]))
        assert max(d0, d1) == pytest.approx(h, abs=1e-12)
    with pytest.raises(ValueError):
        dispersion(0, 0, parts, cfg)


def test_classical_criteria_match_formulas():
    n = 60
    sample = draw(n, density="s1")
    fam = histogram_family(n, (0.0, 1.0), bins=(3,))
    splits = make_splits(n, 3, 2)
    parts = fit_partials(fam, sample, splits)
    kl = klvf_criterion(0, parts, sample)
    ls = lsvf_criterion(0, parts, sample)
    # recompute by hand from the definitions
    want_kl, want_ls = 0.0, 0.0
    for j, block in enumerate(splits.blocks):
        est = parts.estimates[j][0]
        vals = est.pdf(sample[block])
        want_kl += np.mean(-np.log(np.maximum(vals, 1e-300)))
        want_ls += l2_norm_sq(est) - 2.0 * np.mean(vals)
    assert kl == pytest.approx(want_kl / 3, abs=1e-12)
    assert ls == pytest.approx(want_ls / 3, abs=1e-12)


# ---------------------------------------------------------------------------
# selectors
# ---------------------------------------------------------------------------

def run_both(n=100, V=4, K=9, key=0, density="s3", statistic="birge"):
    sample = draw(n, key=key, density=density)
    fam = histogram_family(n, (float(sample.min()), float(sample.max())),
                           bins=tuple(range(1, K + 1)))
    splits = make_splits(n, V, np.random.SeedSequence(1234, spawn_key=(key,)))
    cfg = TestConfig(statistic=statistic, theta=0.25)
    naive = select_naive(fam, sample, cfg=cfg, splits=splits, keep_pair_tests=True)
    fast = select_fast(fam, sample, cfg=cfg, splits=splits)
    return naive, fast


@pytest.mark.parametrize("statistic", ["birge", "baraud"])
@pytest.mark.parametrize("key", [0, 1, 2])
def test_fast_equals_naive(key, statistic):
    naive, fast = run_both(key=key, statistic=statistic)
    assert fast.chosen == naive.chosen
    assert fast.criteria[fast.chosen] == pytest.approx(
        naive.criteria[naive.chosen], abs=1e-15)
    assert fast.tests_performed <= naive.tests_performed


def test_naive_tests_every_pair_once_per_fold():
    naive, _ = run_both(n=60, V=3, K=6)
    assert naive.tests_performed == 3 * (6 * 5) // 2
    assert len(naive.pair_tests) == naive.tests_performed
    assert naive.complete.all()


def test_fast_lower_bounds_never_exceed_truth():
    naive, fast = run_both(n=120, V=5, K=12, key=3)
    exact = naive.lower_bounds  # (V, K) of true squared dispersions
    assert np.all(fast.lower_bounds <= exact + 1e-15)


def test_criterion_equals_mean_square_dispersion():
    naive, _ = run_both(n=80, V=4, K=7, key=4)
    for m, crit in naive.criteria.items():
        assert crit == pytest.approx(float(np.mean(naive.dispersions[m] ** 2)),
                                     abs=1e-15)
        np.testing.assert_allclose(naive.dispersions[m] ** 2,
                                   naive.lower_bounds[:, m], atol=1e-15)


def test_tie_break_prefers_smaller_index():
    # duplicated member: identical partials make every test degenerate, so
    # both carry criterion 0 and the smaller index must win
    n = 40
    sample = draw(n, density="s1")
    fam = histogram_family(n, (0.0, 1.0), bins=(2, 2))
    res = select_naive(fam, sample, V=2, seed=0)
    assert res.chosen == 0
    assert res.degenerate_pairs == 2  # one per fold
    fast = select_fast(fam, sample, V=2, seed=0)
    assert fast.chosen == 0


def test_warm_start_is_lsvf_by_default():
    n, V = 90, 3
    sample = draw(n, key=6)
    fam = histogram_family(n, (float(sample.min()), float(sample.max())),
                           bins=tuple(range(1, 9)))
    splits = make_splits(n, V, 77)
    fast = select_fast(fam, sample, cfg=TestConfig(), splits=splits)
    classical = select_classical(fam, sample, splits=splits, contrast="ls")
    assert fast.warm_start == classical.chosen
    pinned = select_fast(fam, sample, cfg=TestConfig(), splits=splits, warm_start=0)
    assert pinned.warm_start == 0
    assert pinned.chosen == fast.chosen


def test_select_classical_contrasts():
    n = 100
    sample = draw(n, key=7, density="s1")
    fam = histogram_family(n, (0.0, 1.0), bins=(1, 4, 9))
    splits = make_splits(n, 4, 3)
    for contrast in ("kl", "ls"):
        res = select_classical(fam, sample, splits=splits, contrast=contrast)
        assert res.method == {"kl": "klvf", "ls": "lsvf"}[contrast]
        assert res.criteria.shape == (3,)
        assert res.chosen == int(np.argmin(res.criteria))
    with pytest.raises(ValueError):
        select_classical(fam, sample, splits=splits, contrast="other")


def test_final_estimator_modes():
    n, V = 80, 4
    sample = draw(n, key=8, density="s1")
    fam = histogram_family(n, (0.0, 1.0), bins=(2, 5))
    splits = make_splits(n, V, 9)
    res = select_naive(fam, sample, cfg=TestConfig(), splits=splits, final="average")
    avg = res.estimate
    refit = final_estimator(res, "refit", family=fam, sample=sample)
    # equal-size blocks: the fold average IS the full-sample fit
    x = np.linspace(0, 1, 500)
    np.testing.assert_allclose(avg.pdf(x), refit.pdf(x), atol=1e-12)
    with pytest.raises(ValueError):
        final_estimator(res, "other", family=fam, sample=sample)


def test_selection_result_telemetry():
    naive, fast = run_both(n=100, V=4, K=9, key=9)
    assert naive.method == "tvf-naive" and fast.method == "tvf-fast"
    assert fast.complete[fast.chosen]
    assert naive.floored_evaluations >= 0
    assert naive.chosen_label == naive.labels[naive.chosen]
    # criteria only carry completed members
    assert set(fast.criteria) == set(np.flatnonzero(fast.complete).tolist())


def test_selectors_validate_inputs():
    sample = draw(30, density="s1")
    fam = histogram_family(30, (0.0, 1.0), bins=(1, 2))
    with pytest.raises(ValueError):
        select_naive(fam, sample, V=1, seed=0)
    with pytest.raises(ValueError):
        select_naive(fam, sample[:5], V=2, splits=make_splits(30, 2, 0))


def test_kernel_family_selection_smoke():
    n = 60
    sample = draw(n, key=10)
    fam = kernel_family(n, bandwidths=(0.05, 0.15, 0.4))
    naive = select_naive(fam, sample, V=3, seed=4)
    fast = select_fast(fam, sample, V=3, seed=4)
    assert naive.chosen == fast.chosen


def test_combined_family_fast_equals_naive():
    n = 80
    sample = draw(n, key=11)
    lo, hi = float(sample.min()), float(sample.max())
    fam = EstimatorFamily(
        labels=("hist-2", "hist-5", "kern-0.1", "kern-0.3"),
        kinds=("histogram", "histogram", "kernel", "kernel"),
        bins=(2, 5, None, None),
        bandwidths=(None, None, 0.1, 0.3),
        support=(lo, hi),
    )
    for statistic in ("birge", "baraud"):
        cfg = TestConfig(statistic=statistic)
        splits = make_splits(n, 4, 8)
        naive = select_naive(fam, sample, cfg=cfg, splits=splits)
        fast = select_fast(fam, sample, cfg=cfg, splits=splits)
        assert naive.chosen == fast.chosen
