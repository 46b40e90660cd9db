"""V-fold selection of a density estimator by pairwise robust tests.

The selection criterion for a candidate m is the averaged squared fold
dispersion: within fold j, the dispersion of m is the largest Hellinger
distance h(partial_l, partial_m) over competitors l that beat m in the
pairwise test on the held-out block. The naive selector runs every test in
every fold; the fast selector maintains running lower bounds on each
candidate's total, prunes candidates whose bound already exceeds the best
completed total, and jumps to the most promising candidate next, producing
the same winner with far fewer test evaluations.

Classical V-fold criteria (log contrast and least-squares contrast) are
provided for comparison and for warm-starting the fast selector.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import metrics, robust
from .estimators import (DensityEstimate, average_estimates, bandwidth_grid,
                         bin_grid, fit_histogram, fit_kernel, l2_norm_sq)
from .metrics import DEFAULT_QUAD, QuadratureConfig
from .robust import DEGENERATE_AFFINITY, TestConfig, run_test

__all__ = [
    "SplitScheme",
    "make_splits",
    "EstimatorFamily",
    "histogram_family",
    "kernel_family",
    "combined_family",
    "family_for",
    "PartialFits",
    "fit_partials",
    "dispersion",
    "tvf_criterion",
    "klvf_criterion",
    "lsvf_criterion",
    "SelectionResult",
    "ClassicalResult",
    "select_naive",
    "select_fast",
    "select_classical",
    "final_estimator",
]

_GRID_BUDGET = 1 << 16        # nodes in the fine evaluation grid of a fold
_GRID_HARD_CAP = 1 << 18
_SQRT2PI = math.sqrt(2.0 * math.pi)
_UNSET = object()


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitScheme:
    """A random partition of indices 0..n-1 into V blocks of near-equal size."""

    n: int
    V: int
    blocks: tuple[np.ndarray, ...]
    seed: int | None = None


def make_splits(n: int, V: int, seed) -> SplitScheme:
    """Uniformly random partition; block sizes differ by at most one.

    The first n mod V blocks carry the extra point. Deterministic in ``seed``.
    """
    if V < 2:
        raise ValueError("need at least 2 folds")
    if V > n:
        raise ValueError("more folds than observations")
    rng = np.random.Generator(np.random.Philox(seed))
    perm = rng.permutation(n)
    base, extra = divmod(n, V)
    blocks = []
    at = 0
    for j in range(V):
        size = base + (1 if j < extra else 0)
        blocks.append(np.sort(perm[at:at + size]))
        at += size
    return SplitScheme(n=n, V=V, blocks=tuple(blocks),
                       seed=seed if isinstance(seed, int) else None)


# ---------------------------------------------------------------------------
# candidate families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimatorFamily:
    """An ordered finite family of estimation procedures.

    Members are either regular histograms (``bins`` set) on a shared support
    or Gaussian kernel rules (``bandwidths`` set). ``weights`` are the
    nonnegative per-member penalties entering test thresholds as
    z = weight[l] - weight[m]; zero by default.
    """

    labels: tuple[str, ...]
    kinds: tuple[str, ...]                 # "histogram" | "kernel"
    bins: tuple[int | None, ...]
    bandwidths: tuple[float | None, ...]
    support: tuple[float, float] | None
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.weights is None:
            object.__setattr__(self, "weights", np.zeros(len(self.labels)))
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.labels),):
            raise ValueError("one weight per member required")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "weights", w)
        gamma = float(np.sum(np.exp(-w)))
        if gamma < 0.5:
            warnings.warn(f"weight normaliser {gamma:.4g} < 1/2; "
                          "test thresholds may be too aggressive", stacklevel=3)

    @property
    def size(self) -> int:
        return len(self.labels)

    def fit_one(self, k: int, sample) -> DensityEstimate:
        if not 0 <= k < self.size:
            raise ValueError(f"member index {k} out of range")
        if self.kinds[k] == "histogram":
            return fit_histogram(sample, self.bins[k], self.support)
        return fit_kernel(sample, self.bandwidths[k])

    def with_weights(self, weights) -> "EstimatorFamily":
        return EstimatorFamily(labels=self.labels, kinds=self.kinds,
                               bins=self.bins, bandwidths=self.bandwidths,
                               support=self.support,
                               weights=np.asarray(weights, dtype=float))


def histogram_family(n: int, support: tuple[float, float],
                     bins=None) -> EstimatorFamily:
    """Regular histograms with bin counts from ``bin_grid(n)`` by default."""
    bins = list(bins) if bins is not None else bin_grid(n)
    return EstimatorFamily(
        labels=tuple(f"hist-{b}" for b in bins),
        kinds=("histogram",) * len(bins),
        bins=tuple(int(b) for b in bins),
        bandwidths=(None,) * len(bins),
        support=(float(support[0]), float(support[1])),
    )


def kernel_family(n: int, bandwidths=None) -> EstimatorFamily:
    """Gaussian kernel rules on the ladder from ``bandwidth_grid(n)``."""
    ws = list(bandwidths) if bandwidths is not None else bandwidth_grid(n)
    return EstimatorFamily(
        labels=tuple(f"kern-{w:.6g}" for w in ws),
        kinds=("kernel",) * len(ws),
        bins=(None,) * len(ws),
        bandwidths=tuple(float(w) for w in ws),
        support=None,
    )


def combined_family(n: int, support: tuple[float, float]) -> EstimatorFamily:
    """Histograms followed by kernel rules; index order fixes tie-breaks."""
    fr = histogram_family(n, support)
    fk = kernel_family(n)
    return EstimatorFamily(
        labels=fr.labels + fk.labels,
        kinds=fr.kinds + fk.kinds,
        bins=fr.bins + fk.bins,
        bandwidths=fr.bandwidths + fk.bandwidths,
        support=fr.support,
    )


def family_for(code: str, n: int, support: tuple[float, float]) -> EstimatorFamily:
    if code == "R":
        return histogram_family(n, support)
    if code == "K":
        return kernel_family(n)
    if code == "KR":
        return combined_family(n, support)
    raise ValueError(f"unknown family code {code!r} (use R, K or KR)")


# ---------------------------------------------------------------------------
# partial fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartialFits:
    """estimates[j][k]: member k fitted on everything outside block j."""

    splits: SplitScheme
    labels: tuple[str, ...]
    estimates: tuple[tuple[DensityEstimate, ...], ...]


def fit_partials(family: EstimatorFamily, sample, splits: SplitScheme) -> PartialFits:
    sample = np.asarray(sample, dtype=float)
    if sample.size != splits.n:
        raise ValueError("splits were made for a different sample size")
    rows = []
    for j in range(splits.V):
        mask = np.ones(splits.n, dtype=bool)
        mask[splits.blocks[j]] = False
        train = sample[mask]
        rows.append(tuple(family.fit_one(k, train) for k in range(family.size)))
    return PartialFits(splits=splits, labels=family.labels, estimates=tuple(rows))


# ---------------------------------------------------------------------------
# exact structures for pairs of regular histograms
# ---------------------------------------------------------------------------

@lru_cache(maxsize=20_000)
def _regular_pair_structure(lo: float, hi: float, nb_l: int, nb_m: int):
    """Common refinement of two regular partitions of [lo, hi].

    Returns (widths, idx_l, idx_m): segment widths plus the source bin of
    each segment in either partition. Depends only on the bin counts and the
    support, so it is cached globally and shared across folds and runs.
    """
    el = np.linspace(lo, hi, nb_l + 1)
    em = np.linspace(lo, hi, nb_m + 1)
    edges = np.union1d(el, em)
    mids = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    span = hi - lo
    il = np.minimum(((mids - lo) / span * nb_l).astype(np.intp), nb_l - 1)
    im = np.minimum(((mids - lo) / span * nb_m).astype(np.intp), nb_m - 1)
    return widths, il, im


@lru_cache(maxsize=8)
def _hist_block_plan(lo: float, hi: float, kinds: tuple, bins: tuple):
    """Flattened refinement structures for every histogram-histogram pair of
    a family, so one gather + segment-sum evaluates all their affinities in
    a fold at once. Cached per family geometry; the cache is kept small
    because data-range supports give every replication its own geometry.

    Returns None when the family has fewer than two histogram members,
    else (pair_pos, widths, idx_l, idx_m, starts, offsets) where idx_* index
    into the concatenation of the histogram members' height arrays laid out
    at ``offsets``, ``starts`` delimits each pair's segment run, and
    ``pair_pos`` locates each pair in the family's packed pair vector.
    """
    K = len(kinds)
    hist = [k for k in range(K) if kinds[k] == "histogram"]
    if len(hist) < 2:
        return None
    offsets = {}
    at = 0
    for k in hist:
        offsets[k] = at
        at += bins[k]
    pos, ws, ils, ims, starts = [], [], [], [], []
    run = 0
    for a_i, a in enumerate(hist):
        for b in hist[a_i + 1:]:
            widths, il, im = _regular_pair_structure(lo, hi, bins[a], bins[b])
            pos.append(a * (2 * K - a - 1) // 2 + (b - a - 1))
            ws.append(widths)
            ils.append(il + offsets[a])
            ims.append(im + offsets[b])
            starts.append(run)
            run += widths.size
    off_arr = np.full(K, -1, dtype=np.intp)
    for k, o in offsets.items():
        off_arr[k] = o
    return (np.asarray(pos, dtype=np.intp), np.concatenate(ws),
            np.concatenate(ils), np.concatenate(ims),
            np.asarray(starts, dtype=np.intp), off_arr)


# ---------------------------------------------------------------------------
# per-fold evaluation grids for kernel members
# ---------------------------------------------------------------------------

class _FoldGrids:
    """Uniform evaluation grids for the kernel mixtures of one fold.

    All partial mixtures of a fold share their centers and differ only in
    bandwidth, so each is the convolution of one binned empirical measure
    with a Gaussian, evaluated by FFT with the analytic Gaussian transform.
    A fine tier resolves the smallest bandwidths near the data; pairs whose
    bandwidths are both large use a coarse, wider tier. Grid values feed the
    pairwise affinity and integral sums of the selection engine.
    """

    def __init__(self, centers: np.ndarray, bandwidths, hull: tuple[float, float]):
        self.centers = np.asarray(centers, dtype=float)
        ws = sorted(set(float(w) for w in bandwidths))
        if not ws:
            raise ValueError("no kernel members")
        lo = min(float(self.centers.min()), hull[0])
        hi = max(float(self.centers.max()), hull[1])
        span = hi - lo
        delta = ws[0] / 4.0
        budget = _GRID_BUDGET
        while (span + 32.0 * ws[0]) / delta > budget and budget < _GRID_HARD_CAP:
            budget <<= 1
        if (span + 32.0 * ws[0]) / delta > budget:
            raise ValueError("bandwidth grid too extreme for the fold evaluation grid")
        w_split = max(w for w in ws if (span + 32.0 * w) / delta <= budget)
        self.w_split = w_split
        self.tiers = {"fine": self._make_tier(lo, hi, delta, w_split)}
        if w_split < ws[-1]:
            self.tiers["coarse"] = self._make_tier(lo, hi, w_split / 4.0, ws[-1])
        self._fft = {}
        self._sqrt = {}
        self._cum = {}

    @staticmethod
    def _make_tier(lo, hi, delta, wpad):
        x0 = lo - 16.0 * wpad
        need = (hi - lo + 32.0 * wpad) / delta
        size = 1 << max(8, math.ceil(math.log2(need)))
        return {"x0": x0, "delta": delta, "size": size}

    def tier_for(self, w_small: float) -> str:
        return "fine" if (w_small <= self.w_split or "coarse" not in self.tiers) \
            else "coarse"

    def _mass_fft(self, tier: str):
        if tier not in self._fft:
            t = self.tiers[tier]
            pos = (self.centers - t["x0"]) / t["delta"]
            i0 = np.floor(pos).astype(np.intp)
            frac = pos - i0
            mass = np.zeros(t["size"])
            np.add.at(mass, i0, 1.0 - frac)
            np.add.at(mass, i0 + 1, frac)
            freq = np.fft.rfftfreq(t["size"], d=t["delta"])
            self._fft[tier] = (np.fft.rfft(mass), freq)
        return self._fft[tier]

    def sqrt_values(self, w: float, tier: str) -> np.ndarray:
        key = (w, tier)
        if key not in self._sqrt:
            t = self.tiers[tier]
            spec, freq = self._mass_fft(tier)
            damp = np.exp(-2.0 * np.pi ** 2 * w * w * freq * freq)
            g = np.fft.irfft(spec * damp, n=t["size"])
            g /= self.centers.size * t["delta"]
            np.maximum(g, 0.0, out=g)
            # only the square root is kept; values() squares it back, so the
            # two stay consistent to the last bit on every call
            self._sqrt[key] = np.sqrt(g)
        return self._sqrt[key]

    def values(self, w: float, tier: str) -> np.ndarray:
        sq = self.sqrt_values(w, tier)
        return sq * sq

    def xgrid(self, tier: str) -> np.ndarray:
        t = self.tiers[tier]
        return t["x0"] + t["delta"] * np.arange(t["size"])

    def cum_sqrt(self, w: float, tier: str) -> np.ndarray:
        """Cumulative trapezoid of sqrt(values) along the tier grid."""
        key = (w, tier)
        if key not in self._cum:
            sq = self.sqrt_values(w, tier)
            t = self.tiers[tier]
            inner = 0.5 * (sq[1:] + sq[:-1]) * t["delta"]
            self._cum[key] = np.concatenate([[0.0], np.cumsum(inner)])
        return self._cum[key]


def _mixed_baraud_grid(x, g, edges, heights):
    """Integral of (sqrt(hist) - sqrt(kern)) sqrt((hist + kern)/2): exact in
    the histogram, trapezoid in the grid-sampled kernel mixture, panels split
    at the bin edges where the integrand jumps."""
    g_edge = np.interp(edges, x, g)
    idx = np.searchsorted(x, edges)

    def piece(xa, ga, sl, xb, gb, h):
        xs = np.concatenate(([xa], x[sl], [xb]))
        gv = np.concatenate(([ga], g[sl], [gb]))
        f = (math.sqrt(h) - np.sqrt(gv)) * np.sqrt(0.5 * (h + gv))
        return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(xs)))

    total = piece(x[0], g[0], slice(1, idx[0]), edges[0], g_edge[0], 0.0)
    for b in range(heights.size):
        total += piece(edges[b], g_edge[b], slice(idx[b], idx[b + 1]),
                       edges[b + 1], g_edge[b + 1], float(heights[b]))
    total += piece(edges[-1], g_edge[-1], slice(idx[-1], x.size),
                   x[-1], g[-1], 0.0)
    return total


# ---------------------------------------------------------------------------
# shared per-replication store
# ---------------------------------------------------------------------------

class _PairStore:
    """Caches shared by every selection run on one (family, sample, splits).

    Holds the partial fits, per-fold evaluations of all members at the
    held-out points, memoised pairwise affinities and integrals, and the
    classical contrast criteria. Affinities between histogram partials are
    exact common-refinement sums; kernel pairs are integrated on the fold
    grids; mixed pairs combine exact bin sums with cumulative grid integrals.
    """

    def __init__(self, family: EstimatorFamily, sample, splits: SplitScheme,
                 quad: QuadratureConfig | None = None, floor: float = 1e-300):
        self.family = family
        self.sample = np.asarray(sample, dtype=float)
        self.splits = splits
        self.quad = quad or DEFAULT_QUAD
        self.floor = float(floor)
        self.partials = fit_partials(family, self.sample, splits)
        self.valid = tuple(self.sample[b] for b in splits.blocks)

        K, V = family.size, splits.V
        self.E = []
        self.sqrtE = []
        self.floored_evaluations = 0
        for j in range(V):
            pts = self.valid[j]
            E = np.empty((K, pts.size))
            for k in range(K):
                E[k] = self.partials.estimates[j][k].pdf(pts)
            self.floored_evaluations += int(np.sum(E < self.floor))
            Ef = np.maximum(E, self.floor)
            self.E.append(Ef)
            self.sqrtE.append(np.sqrt(Ef))

        # sqrt histogram heights per fold for the exact pair paths
        self._sq_heights = [
            [np.sqrt(est.heights) if est.kind == "histogram" else None
             for est in row] for row in self.partials.estimates
        ]
        self._grids: list = [_UNSET] * V
        if family.support is not None:
            self._plan = _hist_block_plan(family.support[0], family.support[1],
                                          family.kinds, family.bins)
        else:
            self._plan = None
        # packed upper-triangle affinity vector per fold, NaN = not yet known
        self._npairs = K * (K - 1) // 2
        self._rho_vec = [np.full(self._npairs, np.nan) for _ in range(V)]
        self._plan_done = [False] * V
        self._bint: dict[tuple[int, int, int], float] = {}
        self._norm2: list[np.ndarray | None] = [None] * V
        self._classical: dict[str, np.ndarray] = {}

    def _pair_pos(self, lows, highs):
        K = self.family.size
        return lows * (2 * K - lows - 1) // 2 + (highs - lows - 1)

    # -- member geometry ----------------------------------------------------

    def _grids_for(self, j: int) -> _FoldGrids | None:
        """Fold grids, or None when the bandwidth/span combination is too
        extreme for a uniform grid (pairs then fall back to quadrature)."""
        if self._grids[j] is _UNSET:
            fam = self.family
            ws = [w for w, kind in zip(fam.bandwidths, fam.kinds) if kind == "kernel"]
            hull = fam.support if fam.support is not None else (np.inf, -np.inf)
            mask = np.ones(self.splits.n, dtype=bool)
            mask[self.splits.blocks[j]] = False
            try:
                self._grids[j] = _FoldGrids(self.sample[mask], ws, hull)
            except ValueError:
                self._grids[j] = None
        return self._grids[j]

    def estimate(self, j: int, k: int) -> DensityEstimate:
        return self.partials.estimates[j][k]

    # -- pairwise quantities --------------------------------------------------

    def _fill_plan(self, j: int) -> None:
        """Evaluate every histogram-histogram affinity of fold j at once."""
        pos, widths, il, im, starts, offsets = self._plan
        flat = np.concatenate([self._sq_heights[j][k]
                               for k in range(self.family.size)
                               if offsets[k] >= 0])
        vals = widths * flat[il] * flat[im]
        rho = np.add.reduceat(vals, starts)
        # never overwrite an affinity already computed through the scalar
        # path: a memoised value must stay bit-stable for the whole run
        blank = np.isnan(self._rho_vec[j][pos])
        self._rho_vec[j][pos[blank]] = np.clip(rho, 0.0, 1.0)[blank]
        self._plan_done[j] = True

    def affinities(self, j: int, lows, highs) -> np.ndarray:
        """Affinities of the canonical pairs (lows[i], highs[i]) in fold j."""
        vec = self._rho_vec[j]
        pos = self._pair_pos(lows, highs)
        if self._plan is not None and not self._plan_done[j] \
                and np.any(np.isnan(vec[pos])):
            self._fill_plan(j)
        out = vec[pos]
        miss = np.isnan(out)
        if np.any(miss):
            for i in np.nonzero(miss)[0]:
                out[i] = self._one_affinity(j, int(lows[i]), int(highs[i]))
            vec[pos[miss]] = out[miss]
        return out

    def affinity(self, j: int, l: int, m: int) -> float:
        if l > m:
            l, m = m, l
        pos = self._pair_pos(l, m)
        got = self._rho_vec[j][pos]
        if not math.isnan(got):
            return float(got)
        rho = self._one_affinity(j, l, m)
        self._rho_vec[j][pos] = rho
        return rho

    def _one_affinity(self, j: int, l: int, m: int) -> float:
        fam = self.family
        kl, km = fam.kinds[l], fam.kinds[m]
        if kl == "histogram" and km == "histogram":
            lo, hi = fam.support
            widths, il, im = _regular_pair_structure(lo, hi, fam.bins[l], fam.bins[m])
            rho = float(np.sum(widths * self._sq_heights[j][l][il]
                               * self._sq_heights[j][m][im]))
        elif kl == "kernel" and km == "kernel":
            g = self._grids_for(j)
            if g is None:
                rho = metrics.hellinger_affinity(self.estimate(j, l),
                                                 self.estimate(j, m), self.quad)
            else:
                tier = g.tier_for(min(fam.bandwidths[l], fam.bandwidths[m]))
                sl = g.sqrt_values(fam.bandwidths[l], tier)
                sm = g.sqrt_values(fam.bandwidths[m], tier)
                rho = g.tiers[tier]["delta"] * float(np.sum(sl * sm))
        else:
            h, kern = (l, m) if kl == "histogram" else (m, l)
            rho = self._mixed_affinity(j, h, kern)
        return min(max(rho, 0.0), 1.0)

    def _mixed_affinity(self, j: int, h: int, kern: int) -> float:
        fam = self.family
        est = self.estimate(j, h)
        g = self._grids_for(j)
        if g is None:
            return metrics.hellinger_affinity(est, self.estimate(j, kern),
                                              self.quad)
        tier = g.tier_for(fam.bandwidths[kern])
        cum = g.cum_sqrt(fam.bandwidths[kern], tier)
        x = g.xgrid(tier)
        seg = np.diff(np.interp(est.breakpoints, x, cum))
        return float(np.sum(np.sqrt(est.heights) * seg))

    def baraud_integral(self, j: int, l: int, m: int) -> float:
        if l > m:
            l, m = m, l
        key = (j, l, m)
        hit = self._bint.get(key)
        if hit is not None:
            return hit
        fam = self.family
        kl, km = fam.kinds[l], fam.kinds[m]
        if kl == "histogram" and km == "histogram":
            lo, hi = fam.support
            widths, il, im = _regular_pair_structure(lo, hi, fam.bins[l], fam.bins[m])
            hl = self.estimate(j, l).heights[il]
            hm = self.estimate(j, m).heights[im]
            val = float(np.sum(widths * (np.sqrt(hl) - np.sqrt(hm))
                               * np.sqrt(0.5 * (hl + hm))))
        elif kl == "kernel" and km == "kernel":
            g = self._grids_for(j)
            if g is None:
                val = robust.baraud_integral(self.estimate(j, l),
                                             self.estimate(j, m), self.quad)
            else:
                tier = g.tier_for(min(fam.bandwidths[l], fam.bandwidths[m]))
                sl = g.sqrt_values(fam.bandwidths[l], tier)
                sm = g.sqrt_values(fam.bandwidths[m], tier)
                vl = g.values(fam.bandwidths[l], tier)
                vm = g.values(fam.bandwidths[m], tier)
                val = g.tiers[tier]["delta"] * float(
                    np.sum((sl - sm) * np.sqrt(0.5 * (vl + vm))))
        else:
            h, kern = (l, m) if kl == "histogram" else (m, l)
            sign = 1.0 if h == l else -1.0
            g = self._grids_for(j)
            if g is None:
                val = robust.baraud_integral(self.estimate(j, l),
                                             self.estimate(j, m), self.quad)
            else:
                est = self.estimate(j, h)
                tier = g.tier_for(self.family.bandwidths[kern])
                gv = g.values(self.family.bandwidths[kern], tier)
                val = sign * _mixed_baraud_grid(g.xgrid(tier), gv,
                                                est.breakpoints, est.heights)
        self._bint[key] = val
        return val

    # -- classical contrasts --------------------------------------------------

    def _norms_for(self, j: int) -> np.ndarray:
        if self._norm2[j] is None:
            fam = self.family
            out = np.empty(fam.size)
            d2s = None
            ntrain = 0
            for k in range(fam.size):
                est = self.estimate(j, k)
                if est.kind == "histogram":
                    out[k] = float(np.sum(est.heights ** 2 * np.diff(est.breakpoints)))
                else:
                    if d2s is None:
                        c = est.centers
                        ntrain = c.size
                        d2s = np.sort(((c[:, None] - c[None, :]) ** 2).ravel())
                    w = est.bandwidth
                    # bumps farther apart than 10 bandwidths contribute < 1e-10
                    cut = np.searchsorted(d2s, (10.0 * w) ** 2, side="right")
                    s = float(np.sum(np.exp(-d2s[:cut] / (4.0 * w * w))))
                    out[k] = s / (ntrain * ntrain * 2.0 * w * math.sqrt(math.pi))
            self._norm2[j] = out
        return self._norm2[j]

    def classical_criteria(self, contrast: str) -> np.ndarray:
        """Per-member criterion for the "kl" or "ls" contrast.

        The evaluation matrices are already floored, so the log contrast is
        -log(max(t(x), floor)) as required.
        """
        if contrast not in ("kl", "ls"):
            raise ValueError(f"unknown contrast {contrast!r}")
        if contrast not in self._classical:
            V = self.splits.V
            acc = np.zeros(self.family.size)
            for j in range(V):
                if contrast == "kl":
                    acc += np.mean(-np.log(self.E[j]), axis=1)
                else:
                    acc += self._norms_for(j) - 2.0 * np.mean(self.E[j], axis=1)
            self._classical[contrast] = acc / V
        return self._classical[contrast]


# ---------------------------------------------------------------------------
# the pairwise test engine
# ---------------------------------------------------------------------------

def _birge_rows(sq_lo, sq_hi, rho, theta):
    """Batched statistic rows in canonical (smaller-index first) orientation."""
    omega = np.arccos(np.clip(rho, 0.0, 1.0))[:, None]
    a = np.sin(omega * (1.0 - theta))
    b = np.sin(omega * theta)
    return np.log((a * sq_lo + b * sq_hi) / (a * sq_hi + b * sq_lo)).sum(axis=1)


class _TestEngine:
    """Memoised pairwise tests over a _PairStore for one statistic config.

    Tests are always evaluated with the smaller member index as the first
    operand, so repeated queries in either orientation return the identical
    cached outcome, and batched and one-at-a-time evaluation produce the
    same floats. A degenerate pair (affinity at 1 within 1e-12) yields
    winner -1 and is skipped by the selection bookkeeping.
    """

    _ABSENT = -2   # memo sentinel; -1 marks a degenerate pair

    def __init__(self, store: _PairStore, cfg: TestConfig):
        self.store = store
        self.cfg = cfg
        K, V = store.family.size, store.splits.V
        self._win = np.full((V, K, K), self._ABSENT, dtype=np.int32)
        self._h2 = np.zeros((V, K, K))
        self.tests_performed = 0
        self.degenerate_pairs = 0

    def _stat_rows(self, j, lows, highs, rho):
        sqE = self.store.sqrtE[j]
        if self.cfg.statistic == "birge":
            return _birge_rows(sqE[lows], sqE[highs], rho, self.cfg.theta)
        E = self.store.E[j]
        emp = np.mean((sqE[lows] - sqE[highs])
                      / np.sqrt(0.5 * (E[lows] + E[highs])), axis=1)
        ints = np.array([self.store.baraud_integral(j, l, m)
                         for l, m in zip(lows, highs)])
        return 0.5 * (emp + ints)

    def batch_tests(self, j: int, lows, highs):
        """Run (or recall) the tests (j, lows[i], highs[i]); canonical order
        required. Returns (winners, h2) with winner -1 marking degenerate."""
        lows = np.asarray(lows, dtype=np.intp)
        highs = np.asarray(highs, dtype=np.intp)
        wins = self._win[j, lows, highs]
        fresh = wins == self._ABSENT
        if np.any(fresh):
            flo, fhi = lows[fresh], highs[fresh]
            rho = self.store.affinities(j, flo, fhi)
            self.tests_performed += flo.size
            live = rho < DEGENERATE_AFFINITY
            w = np.full(flo.size, -1, dtype=np.int32)
            if np.any(live):
                llo, lhi, lrho = flo[live], fhi[live], rho[live]
                T = self._stat_rows(j, llo, lhi, lrho)
                z = self.store.family.weights[llo] - self.store.family.weights[lhi]
                w[live] = np.where(T > z, llo, np.where(T < z, lhi, llo))
            self.degenerate_pairs += int(flo.size - np.sum(live))
            self._win[j, flo, fhi] = w
            self._h2[j, flo, fhi] = 1.0 - rho
            wins = self._win[j, lows, highs]
        return wins, self._h2[j, lows, highs]

    def test(self, j: int, l: int, m: int) -> tuple[int, float]:
        if l > m:
            l, m = m, l
        got = int(self._win[j, l, m])
        if got != self._ABSENT:
            return got, float(self._h2[j, l, m])
        wins, h2s = self.batch_tests(j, np.array([l]), np.array([m]))
        return int(wins[0]), float(h2s[0])

    def export_pairs(self) -> dict:
        """Performed tests as {(fold, l, m): (winner index or None, h^2)}."""
        out = {}
        V, K = self.store.splits.V, self.store.family.size
        js, ls, ms = np.nonzero(self._win != self._ABSENT)
        for j, l, m in zip(js, ls, ms):
            w = int(self._win[j, l, m])
            out[(int(j), int(l), int(m))] = (None if w < 0 else w,
                                             float(self._h2[j, l, m]))
        return out


# ---------------------------------------------------------------------------
# criteria (reference implementations)
# ---------------------------------------------------------------------------

def dispersion(m: int, j: int, partials: PartialFits, cfg: TestConfig,
               weights=None, validation=None) -> float:
    """Fold-j dispersion of member m: the largest Hellinger distance to a
    competitor that beats m on the held-out points. Reference path built on
    the public metric and test functions."""
    ests = partials.estimates[j]
    if validation is None:
        raise ValueError("validation points are required")
    K = len(ests)
    w = np.zeros(K) if weights is None else np.asarray(weights, dtype=float)
    best = 0.0
    for l in range(K):
        if l == m:
            continue
        rho = metrics.hellinger_affinity(ests[l], ests[m])
        if rho >= DEGENERATE_AFFINITY:
            continue
        out = run_test(ests[l], ests[m], w[l] - w[m], cfg, validation,
                       indices=(l, m), affinity=rho)
        if out.winner == "first":
            best = max(best, math.sqrt(max(1.0 - rho, 0.0)))
    return best


def tvf_criterion(dispersions) -> float:
    """Mean of squared per-fold dispersions."""
    d = np.asarray(dispersions, dtype=float)
    if d.size == 0:
        raise ValueError("no dispersions given")
    return float(np.mean(d * d))


def _block_means(values_per_point, splits, sample_blocks):
    return float(np.mean(values_per_point))


def klvf_criterion(m: int, partials: PartialFits, sample,
                   floor: float = 1e-300) -> float:
    """Classical V-fold log contrast: averaged held-out -log density."""
    sample = np.asarray(sample, dtype=float)
    acc = 0.0
    V = partials.splits.V
    for j in range(V):
        pts = sample[partials.splits.blocks[j]]
        vals = np.maximum(partials.estimates[j][m].pdf(pts), floor)
        acc += float(np.mean(-np.log(vals)))
    return acc / V


def lsvf_criterion(m: int, partials: PartialFits, sample,
                   quad: QuadratureConfig | None = None) -> float:
    """Classical V-fold least-squares contrast: ||t||^2 - 2 mean t(X)."""
    sample = np.asarray(sample, dtype=float)
    acc = 0.0
    V = partials.splits.V
    for j in range(V):
        pts = sample[partials.splits.blocks[j]]
        est = partials.estimates[j][m]
        acc += l2_norm_sq(est, quad) - 2.0 * float(np.mean(est.pdf(pts)))
    return acc / V


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class SelectionResult:
    """Outcome of a dispersion-criterion selection run.

    ``lower_bounds`` is the (V, K) table of running squared-distance bounds;
    rows of members never fully processed by the fast algorithm are partial.
    ``criteria`` and ``dispersions`` only carry fully computed members; the
    chosen index minimises the criterion among them (ties to the smallest
    index).
    """

    chosen: int
    labels: tuple[str, ...]
    criteria: dict[int, float]
    dispersions: dict[int, np.ndarray]
    lower_bounds: np.ndarray
    complete: np.ndarray
    tests_performed: int
    degenerate_pairs: int
    floored_evaluations: int
    method: str
    warm_start: int | None
    final_mode: str | None
    estimate: DensityEstimate | None
    partials: PartialFits
    pair_tests: dict | None = None

    @property
    def chosen_label(self) -> str:
        return self.labels[self.chosen]


@dataclass
class ClassicalResult:
    chosen: int
    labels: tuple[str, ...]
    criteria: np.ndarray
    floored_evaluations: int
    method: str
    final_mode: str | None
    estimate: DensityEstimate | None
    partials: PartialFits

    @property
    def chosen_label(self) -> str:
        return self.labels[self.chosen]


def _column_sum(L: np.ndarray, k: int) -> float:
    # single summation path for criterion totals, shared by both selectors
    return float(np.sum(L[:, k]))


def _attach_final(final, family, sample, partials, chosen):
    if final is None:
        return None, None
    if final == "refit":
        return "refit", family.fit_one(chosen, sample)
    if final == "average":
        parts = [partials.estimates[j][chosen] for j in range(partials.splits.V)]
        return "average", average_estimates(parts)
    raise ValueError(f"unknown final mode {final!r}")


def _all_canonical_pairs(K: int):
    lows, highs = np.triu_indices(K, k=1)
    return lows.astype(np.intp), highs.astype(np.intp)


# ---------------------------------------------------------------------------
# selectors
# ---------------------------------------------------------------------------

def select_naive(family: EstimatorFamily, sample, V: int | None = None,
                 cfg: TestConfig | None = None, seed=0, *,
                 splits: SplitScheme | None = None,
                 quad: QuadratureConfig | None = None,
                 final: str | None = "average",
                 keep_pair_tests: bool = False,
                 _store: _PairStore | None = None) -> SelectionResult:
    """Exhaustive selection: every pair tested in every fold.

    Each test outcome is shared between the two members' dispersions, so the
    total count is V * K(K-1)/2.
    """
    cfg = cfg or TestConfig()
    sample = np.asarray(sample, dtype=float)
    splits = splits or make_splits(sample.size, V, seed)
    store = _store or _PairStore(family, sample, splits, quad, cfg.floor)
    engine = _TestEngine(store, cfg)
    K, Vn = family.size, splits.V
    L = np.zeros((Vn, K))
    lows, highs = _all_canonical_pairs(K)
    for j in range(Vn):
        wins, h2s = engine.batch_tests(j, lows, highs)
        live = wins >= 0
        losers = np.where(wins[live] == lows[live], highs[live], lows[live])
        np.maximum.at(L[j], losers, h2s[live])
    crit = np.array([_column_sum(L, k) for k in range(K)]) / Vn
    chosen = int(np.argmin(crit))
    mode, est = _attach_final(final, family, sample, store.partials, chosen)
    return SelectionResult(
        chosen=chosen,
        labels=family.labels,
        criteria={k: float(crit[k]) for k in range(K)},
        dispersions={k: np.sqrt(L[:, k]) for k in range(K)},
        lower_bounds=L,
        complete=np.ones(K, dtype=bool),
        tests_performed=engine.tests_performed,
        degenerate_pairs=engine.degenerate_pairs,
        floored_evaluations=store.floored_evaluations,
        method="tvf-naive",
        warm_start=None,
        final_mode=mode,
        estimate=est,
        partials=store.partials,
        pair_tests=engine.export_pairs() if keep_pair_tests else None,
    )


def select_fast(family: EstimatorFamily, sample, V: int | None = None,
                cfg: TestConfig | None = None, seed=0, *,
                warm_start: int | None = None,
                splits: SplitScheme | None = None,
                quad: QuadratureConfig | None = None,
                final: str | None = "average",
                keep_pair_tests: bool = False,
                _store: _PairStore | None = None) -> SelectionResult:
    """Pruned selection with running lower bounds; same winner as
    select_naive with at most as many test evaluations.

    Starts from ``warm_start`` (default: the least-squares contrast pick),
    computes that member's criterion in full, then repeatedly jumps to the
    candidate with the smallest running total, aborting a candidate as soon
    as its total exceeds the best completed one and dropping candidates
    whose bounds pass the record. Tests already run are recalled, not
    recounted.
    """
    cfg = cfg or TestConfig()
    sample = np.asarray(sample, dtype=float)
    splits = splits or make_splits(sample.size, V, seed)
    store = _store or _PairStore(family, sample, splits, quad, cfg.floor)
    engine = _TestEngine(store, cfg)
    K, Vn = family.size, splits.V

    if warm_start is None:
        start = int(np.argmin(store.classical_criteria("ls")))
    else:
        start = int(warm_start)
        if not 0 <= start < K:
            raise ValueError("warm start index out of range")

    L = np.zeros((Vn, K))
    S = np.zeros(K)
    active = np.ones(K, dtype=bool)
    active[start] = False
    complete = np.zeros(K, dtype=bool)
    complete[start] = True

    others = np.array([k for k in range(K) if k != start], dtype=np.intp)
    lows = np.minimum(others, start)
    highs = np.maximum(others, start)
    for j in range(Vn):
        wins, h2s = engine.batch_tests(j, lows, highs)
        for i in range(others.size):
            win = wins[i]
            if win < 0:
                continue
            loser = others[i] if win == start else start
            if h2s[i] > L[j, loser]:
                L[j, loser] = h2s[i]
    for k in range(K):
        S[k] = _column_sum(L, k)
    record = S[start]
    opt = start
    active &= ~(S > record)

    chunk = 32
    while np.any(active):
        totals = np.where(active, S, np.inf)
        m = int(np.argmin(totals))
        active[m] = False
        rivals = np.concatenate([np.arange(m), np.arange(m + 1, K)])
        aborted = False
        for j in range(Vn):
            for c in range(0, rivals.size, chunk):
                sub = rivals[c:c + chunk]
                wins, h2s = engine.batch_tests(j, np.minimum(sub, m),
                                               np.maximum(sub, m))
                live = wins >= 0
                beat = live & (wins == m)
                for l, h2 in zip(sub[beat], h2s[beat]):
                    if active[l] and h2 > L[j, l]:
                        L[j, l] = h2
                        S[l] = _column_sum(L, l)
                        if S[l] > record:
                            active[l] = False
                lost = live & ~beat
                if np.any(lost):
                    worst = float(np.max(h2s[lost]))
                    if worst > L[j, m]:
                        L[j, m] = worst
                        S[m] = _column_sum(L, m)
                if S[m] > record:
                    aborted = True
                    break
            if aborted:
                break
        if aborted:
            continue
        complete[m] = True
        if S[m] < record or (S[m] == record and m < opt):
            record = S[m]
            opt = m
            active &= ~(S > record)

    crit = {k: S[k] / Vn for k in range(K) if complete[k]}
    disp = {k: np.sqrt(L[:, k]) for k in range(K) if complete[k]}
    mode, est = _attach_final(final, family, sample, store.partials, opt)
    return SelectionResult(
        chosen=opt,
        labels=family.labels,
        criteria=crit,
        dispersions=disp,
        lower_bounds=L,
        complete=complete,
        tests_performed=engine.tests_performed,
        degenerate_pairs=engine.degenerate_pairs,
        floored_evaluations=store.floored_evaluations,
        method="tvf-fast",
        warm_start=start,
        final_mode=mode,
        estimate=est,
        partials=store.partials,
        pair_tests=engine.export_pairs() if keep_pair_tests else None,
    )


def select_classical(family: EstimatorFamily, sample, V: int | None = None,
                     contrast: str = "kl", seed=0, *,
                     splits: SplitScheme | None = None,
                     quad: QuadratureConfig | None = None,
                     floor: float = 1e-300,
                     final: str | None = "average",
                     _store: _PairStore | None = None) -> ClassicalResult:
    """Classical V-fold selection with the log ("kl") or least-squares
    ("ls") contrast."""
    sample = np.asarray(sample, dtype=float)
    splits = splits or make_splits(sample.size, V, seed)
    store = _store or _PairStore(family, sample, splits, quad, floor)
    crit = store.classical_criteria(contrast)
    chosen = int(np.argmin(crit))
    mode, est = _attach_final(final, family, sample, store.partials, chosen)
    return ClassicalResult(
        chosen=chosen,
        labels=family.labels,
        criteria=crit.copy(),
        floored_evaluations=store.floored_evaluations,
        method="klvf" if contrast == "kl" else "lsvf",
        final_mode=mode,
        estimate=est,
        partials=store.partials,
    )


def final_estimator(result, mode: str, family: EstimatorFamily | None = None,
                    sample=None) -> DensityEstimate:
    """Build the final estimate for a finished selection.

    mode "refit" refits the chosen member on the full sample (requires
    ``family`` and ``sample``); mode "average" averages the chosen member's
    V partial fits. For histogram and kernel members with equal block sizes
    the two coincide.
    """
    if mode == "refit":
        if family is None or sample is None:
            raise ValueError("refit mode needs the family and the full sample")
        return family.fit_one(result.chosen, sample)
    if mode == "average":
        parts = [result.partials.estimates[j][result.chosen]
                 for j in range(result.partials.splits.V)]
        return average_estimates(parts)
    raise ValueError(f"unknown final mode {mode!r}")
