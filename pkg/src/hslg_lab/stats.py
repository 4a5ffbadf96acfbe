"""Statistical machinery for the experiment drivers.

Kolmogorov-Smirnov one- and two-sample tests (asymptotic p-values with the
Stephens small-sample factor), chi-square goodness of fit and independence
on quantile-discretized pairs, and percentile bootstrap intervals drawn from
the bootstrap lane namespace so every interval is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, gammaincc

from .rng import LANE_BOOTSTRAP, lane_keys, uniforms


@dataclass(frozen=True)
class TestResult:
    statistic: float
    pvalue: float


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


def kolmogorov_sf(t: float) -> float:
    """P(sup |Brownian bridge| > t), the asymptotic KS null tail."""
    if t <= 0.0:
        return 1.0
    if t < 1.18:
        # theta-transformed series converges fast for small t
        a = math.exp(-math.pi**2 / (8.0 * t * t))
        s = a * (1.0 + a**8 * (1.0 + a**16))
        return max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / t * s)
    s = 0.0
    for k in range(1, 200):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * t * t)
        s += term
        if abs(term) < 1e-16:
            break
    return min(1.0, max(0.0, s))


def _stephens_p(d: float, en: float) -> float:
    return kolmogorov_sf((en + 0.12 + 0.11 / en) * d)


def ks_test(samples, reference) -> TestResult:
    """KS of `samples` against a CDF callable or a second sample."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 8:
        raise ValueError("KS needs at least 8 samples")
    if callable(reference):
        f = np.asarray(reference(x), dtype=float)
        d_plus = np.max(np.arange(1, n + 1) / n - f)
        d_minus = np.max(f - np.arange(0, n) / n)
        d = float(max(d_plus, d_minus))
        en = math.sqrt(n)
    else:
        y = np.sort(np.asarray(reference, dtype=float).ravel())
        m = y.size
        if m < 8:
            raise ValueError("KS needs at least 8 samples")
        pooled = np.concatenate([x, y])
        f1 = np.searchsorted(x, pooled, side="right") / n
        f2 = np.searchsorted(y, pooled, side="right") / m
        d = float(np.max(np.abs(f1 - f2)))
        en = math.sqrt(n * m / (n + m))
    return TestResult(d, _stephens_p(d, en))


def chi2_sf(x: float, df: float) -> float:
    return float(gammaincc(df / 2.0, x / 2.0))


def chi2_gof(observed, expected, ddof: int = 0) -> TestResult:
    """Pearson goodness of fit; dof = cells - 1 - ddof."""
    o = np.asarray(observed, dtype=float)
    e = np.asarray(expected, dtype=float)
    if o.shape != e.shape:
        raise ValueError("count vectors must have equal shape")
    if np.any(e <= 0.0):
        raise ValueError("expected counts must be positive")
    stat = float(np.sum((o - e) ** 2 / e))
    return TestResult(stat, chi2_sf(stat, o.size - 1 - ddof))


def _quantile_edges(v: np.ndarray, bins: int) -> np.ndarray:
    edges = np.quantile(v, np.linspace(0.0, 1.0, bins + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    if np.unique(edges).size != edges.size:
        raise ValueError("too many ties for quantile binning")
    return edges


def chi2_independence(x, y, bins: int = 8) -> TestResult:
    """Chi-square independence test on marginal-quantile-discretized pairs."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("paired samples must have equal length")
    if x.size < 10 * bins * bins:
        raise ValueError("too few pairs for this many bins")
    cx = np.searchsorted(_quantile_edges(x, bins), x, side="right") - 1
    cy = np.searchsorted(_quantile_edges(y, bins), y, side="right") - 1
    counts = np.zeros((bins, bins))
    np.add.at(counts, (cx, cy), 1.0)
    row = counts.sum(axis=1, keepdims=True)
    col = counts.sum(axis=0, keepdims=True)
    expected = row * col / x.size
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return TestResult(stat, chi2_sf(stat, (bins - 1) ** 2))


def normal_cdf(x):
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def bootstrap_ci(values, stat=np.median, *, resamples: int = 1000,
                 level: float = 0.99, seed: int = 0, stream: int = 0,
                 lane_base: int = 0) -> Interval:
    """Percentile bootstrap interval; `stat` must accept an axis argument.

    Resample r, draw i consumes the dedicated lane
    LANE_BOOTSTRAP + lane_base + r*n + i, so intervals are independent of
    call order and thread count; disjoint `lane_base` ranges keep multiple
    intervals under one (seed, stream) independent.
    """
    vals = np.asarray(values, dtype=float).ravel()
    n = vals.size
    if n < 2:
        raise ValueError("bootstrap needs at least 2 values")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    out = np.empty(resamples)
    chunk = max(1, int(2e7) // n)
    base = np.uint64(LANE_BOOTSTRAP) + np.uint64(lane_base)
    for r0 in range(0, resamples, chunk):
        r1 = min(r0 + chunk, resamples)
        lanes = base + np.arange(r0 * n, r1 * n, dtype=np.uint64)
        u = uniforms(lane_keys(seed, stream, lanes), 0).reshape(r1 - r0, n)
        idx = np.minimum((u * n).astype(np.int64), n - 1)
        out[r0:r1] = stat(vals[idx], axis=1)
    a = (1.0 - level) / 2.0
    return Interval(float(np.quantile(out, a)), float(np.quantile(out, 1.0 - a)))
