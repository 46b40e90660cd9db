"""Benchmark densities addressable by string id.

Every entry states its pdf, cdf and (where closed-form) quantile function in
the docstring of its factory below. Sampling is inverse-cdf driven by a
Philox counter-based generator, so draws are bit-identical for a given seed
on every platform. s1 is the uniform density on [0, 1]; it is the reference
case for the simulation gates and is also representable as an exact
one-bin histogram.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = ["BenchmarkDensity", "registry", "get_density", "pdf_eval"]


@dataclass(frozen=True)
class BenchmarkDensity:
    """A named density with closed-form pdf/cdf and a deterministic sampler."""

    id: str
    label: str
    support: tuple[float, float]
    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    quantile: Callable[[np.ndarray], np.ndarray] | None = None
    sampler: Callable[[int, np.random.Generator], np.ndarray] | None = None
    exact_histogram: tuple | None = field(default=None, repr=False)
    # fallback finite window for unbounded supports without a closed-form
    # quantile; must carry all but ~1e-12 of the mass
    window: tuple[float, float] | None = None

    def sample(self, n: int, seed) -> np.ndarray:
        """Draw ``n`` points. ``seed`` is an int or numpy SeedSequence."""
        if n < 1:
            raise ValueError("sample size must be at least 1")
        rng = np.random.Generator(np.random.Philox(seed))
        if self.sampler is not None:
            return self.sampler(n, rng)
        if self.quantile is None:
            raise ValueError(f"density {self.id} has no sampler")
        return self.quantile(rng.random(n))

    def effective_support(self, tail: float) -> tuple[float, float]:
        lo, hi = self.support
        if np.isfinite(lo) and np.isfinite(hi):
            return lo, hi
        if self.quantile is None:
            if self.window is None:
                raise ValueError(f"density {self.id}: unbounded support without quantile")
            return self.window
        qlo, qhi = self.quantile(np.array([tail, 1.0 - tail]))
        lo = lo if np.isfinite(lo) else float(qlo)
        hi = hi if np.isfinite(hi) else float(qhi)
        return lo, hi

    def _as_plain_histogram(self):
        return self.exact_histogram

    def quad_breakpoints(self):
        lo, hi = self.support
        out = [v for v in (lo, hi) if np.isfinite(v)]
        return np.asarray(out, dtype=float)


def _uniform() -> BenchmarkDensity:
    """s1: uniform on [0, 1]. pdf = 1, cdf = x, quantile = u."""
    return BenchmarkDensity(
        id="s1",
        label="uniform[0,1]",
        support=(0.0, 1.0),
        pdf=lambda x: np.where((x >= 0.0) & (x <= 1.0), 1.0, 0.0),
        cdf=lambda x: np.clip(x, 0.0, 1.0),
        quantile=lambda u: np.asarray(u, dtype=float),
        exact_histogram=(np.array([0.0, 1.0]), np.array([1.0])),
    )


def _exponential() -> BenchmarkDensity:
    """s2: standard exponential. pdf = e^-x (x >= 0), cdf = 1 - e^-x,
    quantile = -log(1 - u)."""
    return BenchmarkDensity(
        id="s2",
        label="exponential(1)",
        support=(0.0, np.inf),
        pdf=lambda x: np.where(x >= 0.0, np.exp(-np.maximum(x, 0.0)), 0.0),
        cdf=lambda x: np.where(x >= 0.0, -np.expm1(-np.maximum(x, 0.0)), 0.0),
        quantile=lambda u: -np.log1p(-np.asarray(u, dtype=float)),
    )


def _gaussian() -> BenchmarkDensity:
    """s3: standard normal. pdf = phi(x), cdf = Phi(x), quantile = Phi^-1(u)."""
    return BenchmarkDensity(
        id="s3",
        label="gaussian(0,1)",
        support=(-np.inf, np.inf),
        pdf=lambda x: np.exp(-0.5 * np.asarray(x, dtype=float) ** 2) / np.sqrt(2.0 * np.pi),
        cdf=lambda x: ndtr(np.asarray(x, dtype=float)),
        quantile=lambda u: ndtri(np.asarray(u, dtype=float)),
    )


def _laplace() -> BenchmarkDensity:
    """s4: standard double exponential. pdf = e^-|x| / 2,
    cdf = e^x/2 (x<0) else 1 - e^-x/2, quantile piecewise logarithmic."""

    def quant(u):
        u = np.asarray(u, dtype=float)
        return np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 * (1.0 - u)))

    return BenchmarkDensity(
        id="s4",
        label="laplace(0,1)",
        support=(-np.inf, np.inf),
        pdf=lambda x: 0.5 * np.exp(-np.abs(np.asarray(x, dtype=float))),
        cdf=lambda x: np.where(np.asarray(x) < 0, 0.5 * np.exp(np.minimum(x, 0.0)),
                               1.0 - 0.5 * np.exp(-np.maximum(x, 0.0))),
        quantile=quant,
    )


def _cauchy() -> BenchmarkDensity:
    """s5: standard Cauchy (heavy tails, no moments).
    pdf = 1/(pi (1+x^2)), cdf = 1/2 + atan(x)/pi, quantile = tan(pi (u-1/2))."""
    return BenchmarkDensity(
        id="s5",
        label="cauchy(0,1)",
        support=(-np.inf, np.inf),
        pdf=lambda x: 1.0 / (np.pi * (1.0 + np.asarray(x, dtype=float) ** 2)),
        cdf=lambda x: 0.5 + np.arctan(np.asarray(x, dtype=float)) / np.pi,
        quantile=lambda u: np.tan(np.pi * (np.asarray(u, dtype=float) - 0.5)),
    )


_BIMODAL_MU = (-1.0, 1.0)
_BIMODAL_SIG = 0.5


def _bimodal() -> BenchmarkDensity:
    """s6: balanced two-component Gaussian mixture
    0.5 N(-1, 0.5^2) + 0.5 N(1, 0.5^2). cdf is the same mixture of Phi's;
    sampling picks the component from one uniform and applies Phi^-1 to another.
    """

    def pdf(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for mu in _BIMODAL_MU:
            z = (x - mu) / _BIMODAL_SIG
            out += 0.5 * np.exp(-0.5 * z * z) / (_BIMODAL_SIG * np.sqrt(2.0 * np.pi))
        return out

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * ndtr((x - _BIMODAL_MU[0]) / _BIMODAL_SIG) \
            + 0.5 * ndtr((x - _BIMODAL_MU[1]) / _BIMODAL_SIG)

    def sampler(n, rng):
        comp = rng.random(n) < 0.5
        z = ndtri(rng.random(n))
        mu = np.where(comp, _BIMODAL_MU[0], _BIMODAL_MU[1])
        return mu + _BIMODAL_SIG * z

    lo = min(_BIMODAL_MU) - 10.0 * _BIMODAL_SIG
    hi = max(_BIMODAL_MU) + 10.0 * _BIMODAL_SIG
    return BenchmarkDensity(
        id="s6",
        label="gaussian mixture (bimodal)",
        support=(-np.inf, np.inf),
        pdf=pdf,
        cdf=cdf,
        quantile=None,
        sampler=sampler,
        window=(lo, hi),
    )


def _triangular() -> BenchmarkDensity:
    """s7: triangular on [0, 1] with peak at 1/2. pdf = 4x then 4(1-x),
    cdf = 2x^2 then 1 - 2(1-x)^2, quantile = sqrt(u/2) then 1 - sqrt((1-u)/2)."""

    def pdf(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= 0.0) & (x <= 1.0)
        return np.where(inside, np.where(x <= 0.5, 4.0 * x, 4.0 * (1.0 - x)), 0.0)

    def cdf(x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return np.where(x <= 0.5, 2.0 * x * x, 1.0 - 2.0 * (1.0 - x) ** 2)

    def quant(u):
        u = np.asarray(u, dtype=float)
        return np.where(u <= 0.5, np.sqrt(u / 2.0), 1.0 - np.sqrt((1.0 - u) / 2.0))

    return BenchmarkDensity(
        id="s7",
        label="triangular on [0,1]",
        support=(0.0, 1.0),
        pdf=pdf,
        cdf=cdf,
        quantile=quant,
    )


_REGISTRY: dict[str, BenchmarkDensity] = {}


def registry() -> tuple[BenchmarkDensity, ...]:
    """All shipped benchmark densities, id order."""
    if not _REGISTRY:
        for make in (_uniform, _exponential, _gaussian, _laplace, _cauchy,
                     _bimodal, _triangular):
            d = make()
            _REGISTRY[d.id] = d
    return tuple(_REGISTRY[k] for k in sorted(_REGISTRY))


def get_density(density_id: str) -> BenchmarkDensity:
    registry()
    if density_id not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY))
        raise ValueError(f"unknown density id {density_id!r} (known: {known})")
    return _REGISTRY[density_id]


def pdf_eval(density: BenchmarkDensity, x) -> np.ndarray:
    """Vectorised pdf evaluation; points outside the support give 0."""
    return np.asarray(density.pdf(np.asarray(x, dtype=float)), dtype=float)
