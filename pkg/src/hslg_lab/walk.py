"""The log-gamma random walk and the random series it feeds.

One increment is X = log Y2 - log Y1 with Y1 ~ Gamma(theta + alpha) and
Y2 ~ Gamma(theta - alpha); in the bound phase its mean tau is positive, so
S_k = X_1 + .. + X_k drifts upward and Q = sum_{p >= 0} exp(-S_p) is a.s.
finite.  Q normalizes the limiting endpoint weights exp(-S_r) / Q.

Walk draws are counter-based: walk identity is (seed, stream) and increment
k consumes the two lanes LANE_CHAIN + 2k and LANE_CHAIN + 2k + 1, so a walk
can be extended deterministically and batches reproduce regardless of
threading.

The increment density is evaluated by adaptive quadrature of the Gamma-type
integral obtained from the convolution by substituting t = e^y (integrated
here in the log variable w = log t, windowed around the integrand's peak);
the closed form this integral happens to have is reserved for tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad

from .rng import LANE_CHAIN, lane_keys, log_gamma_draws
from .special import ModelParams, constants

_U64 = np.uint64


@dataclass(frozen=True)
class WalkSample:
    """Partial sums S_0..S_n of one walk, with the key that extends it."""

    params: ModelParams
    values: np.ndarray
    seed: int
    stream: int

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def walk_increments(params: ModelParams, n: int, seed: int = 0,
                    stream: int = 0, start: int = 0) -> np.ndarray:
    """Increments X_{start+1} .. X_{start+n} of the walk keyed (seed, stream)."""
    if n < 0:
        raise ValueError("increment count must be nonnegative")
    idx = np.arange(start, start + n, dtype=np.uint64)
    base = _U64(LANE_CHAIN) + _U64(2) * idx
    k1 = lane_keys(seed, stream, base)
    k2 = lane_keys(seed, stream, base + _U64(1))
    y1 = log_gamma_draws(params.theta + params.alpha, k1)
    y2 = log_gamma_draws(params.theta - params.alpha, k2)
    return y2 - y1


def walk_increment_matrix(params: ModelParams, samples: int, n: int,
                          seed: int = 0, stream: int = 0) -> np.ndarray:
    """(samples, n) increments; row s is the walk with stream `stream + s`."""
    streams = np.asarray(stream, dtype=np.uint64) + np.arange(samples, dtype=np.uint64)
    base = _U64(LANE_CHAIN) + _U64(2) * np.arange(n, dtype=np.uint64)
    k1 = lane_keys(seed, streams[:, None], base[None, :])
    k2 = lane_keys(seed, streams[:, None], base[None, :] + _U64(1))
    y1 = log_gamma_draws(params.theta + params.alpha, k1)
    y2 = log_gamma_draws(params.theta - params.alpha, k2)
    return y2 - y1


def sample_walk(params: ModelParams, n: int, seed: int = 0,
                stream: int = 0) -> WalkSample:
    """Walk S_0 = 0, S_1, .., S_n."""
    inc = walk_increments(params, n, seed, stream)
    values = np.concatenate([[0.0], np.cumsum(inc)])
    return WalkSample(params, values, int(seed), int(stream))


def extend_walk(walk: WalkSample, n: int) -> WalkSample:
    """The same walk continued out to S_n (no-op when already long enough)."""
    if n <= walk.n:
        return walk
    inc = walk_increments(walk.params, n - walk.n, walk.seed, walk.stream,
                          start=walk.n)
    values = np.concatenate([walk.values, walk.values[-1] + np.cumsum(inc)])
    return WalkSample(walk.params, values, walk.seed, walk.stream)


# ---------------------------------------------------------------------------
# increment law


def _density_scalar(theta: float, alpha: float, x: float) -> float:
    two_t = 2.0 * theta
    big = np.logaddexp(0.0, x)                 # log(1 + e^x)
    wstar = math.log(two_t) - big              # peak of the integrand
    shift = two_t * wstar - two_t              # integrand value at the peak
    left = max(60.0, 80.0 / two_t)             # slow e^{2 theta w} left tail

    def integrand(w):
        expo = two_t * w - math.exp(min(w + big, 700.0)) - shift
        return math.exp(min(expo, 700.0))

    res = quad(integrand, wstar - left, wstar + 60.0, epsabs=0.0,
               epsrel=1e-10, limit=200, full_output=1)
    if len(res) > 3:
        raise RuntimeError(f"density quadrature failed at x={x}: {res[3]}")
    val = res[0]
    if val <= 0.0:
        return 0.0
    logp = ((theta - alpha) * x - math.lgamma(theta + alpha)
            - math.lgamma(theta - alpha) + shift + math.log(val))
    return math.exp(logp)


def increment_density(params: ModelParams, x):
    """Density of one walk increment at x, by quadrature; scalar or array."""
    th, al = params.theta, params.alpha
    arr = np.asarray(x, dtype=float)
    out = np.array([_density_scalar(th, al, float(v)) for v in arr.ravel()])
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


@lru_cache(maxsize=8)
def _cdf_table(theta: float, alpha: float):
    # grid wide enough that both exponential tails are below 1e-12
    lo = -30.0 / (theta - alpha) - 10.0
    hi = 30.0 / (theta + alpha) + 10.0
    grid = np.arange(lo, hi + 0.01, 0.01)
    dens = np.array([_density_scalar(theta, alpha, float(v)) for v in grid])
    cdf = cumulative_trapezoid(dens, grid, initial=0.0)
    cdf = cdf + dens[0] / (theta - alpha)      # mass left of the grid
    return grid, np.clip(cdf, 0.0, 1.0)


def increment_cdf(params: ModelParams, x):
    """CDF of one walk increment, numerically integrated from the density."""
    grid, cdf = _cdf_table(params.theta, params.alpha)
    out = np.interp(np.asarray(x, dtype=float), grid, cdf, left=0.0, right=1.0)
    if np.ndim(x) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# the series Q


@dataclass(frozen=True)
class QSeries:
    """Partial sums Q_0..Q_M with a certified (or flagged) truncation bound.

    `risk` is the Chebyshev bound on the chance that the drift line verified
    over the lookahead window is ever violated beyond it (the only
    non-deterministic part of the certificate); `converged` is False when no
    index up to the cap passed the window check at the requested epsilon.
    """

    partials: np.ndarray
    tail_bound: float
    converged: bool
    risk: float

    @property
    def q(self) -> float:
        return float(self.partials[-1])

    @property
    def m(self) -> int:
        return self.partials.size - 1


def drift_risk(params: ModelParams, window: int) -> float:
    """Bound on P(S_k < S_0 + (tau/2) k for some k >= window).

    Dyadic blocks [2^j, 2^{j+1}): a dip below the half-drift line inside a
    block forces the centered walk below -(tau/2) 2^j, whose probability the
    maximal inequality bounds by 8 gamma / (tau^2 2^j); summed over blocks
    from the first power of two >= window this is 16 gamma / (tau^2 2^j0).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    c = constants(params)
    tau, gamma = c.increment_drift, c.walk_increment_var
    block = 1 << max(0, math.ceil(math.log2(window)))
    return min(1.0, 16.0 * gamma / (tau**2 * block))


def q_partial(params: ModelParams, walk: WalkSample, epsilon: float, *,
              window: int = 64, cap: int = 200_000) -> QSeries:
    """Q_M with certified tail <= epsilon, or a flagged result at the cap.

    The certificate at M requires the lookahead drift check
    S_{M+j} >= S_M + (tau/2) j for j = 1..window together with the geometric
    bound sum_{j>=1} e^{-S_M - (tau/2) j} <= epsilon it then implies.  The
    walk is extended as needed; nothing is truncated silently.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    tau = constants(params).increment_drift
    rho = math.exp(-0.5 * tau)
    geom = rho / (1.0 - rho)

    best_bound = math.inf
    m_found = -1
    lo = 0
    while lo <= cap:
        hi = min(max(2 * lo, 1024), cap)
        walk = extend_walk(walk, hi + window)
        s = walk.values
        # drift line A_k = S_k - (tau/2) k: certificate at M is
        # min_{M < k <= M+window} A_k >= A_M
        a = s - 0.5 * tau * np.arange(s.size)
        ahead = np.full(hi + 1 - lo, np.inf)
        for j in range(1, window + 1):
            ahead = np.minimum(ahead, a[lo + j: hi + 1 + j])
        ok_drift = ahead >= a[lo: hi + 1]
        # deep partial sums underflow harmlessly: the bound only shrinks
        with np.errstate(under="ignore"):
            bound = np.exp(-s[lo: hi + 1]) * geom
        best_bound = min(best_bound, float(bound.min(initial=math.inf)))
        good = np.flatnonzero(ok_drift & (bound <= epsilon))
        if good.size:
            m_found = lo + int(good[0])
            break
        lo = hi + 1

    risk = drift_risk(params, window)
    with np.errstate(under="ignore"):
        if m_found < 0:
            s = walk.values[: cap + 1]
            partials = np.cumsum(np.exp(-s))
            return QSeries(partials, best_bound, False, risk)
        partials = np.cumsum(np.exp(-walk.values[: m_found + 1]))
        tail = float(np.exp(-walk.values[m_found]) * geom)
    return QSeries(partials, tail, True, risk)


@dataclass(frozen=True)
class LimitingPmf:
    """Endpoint weights e^{-S_r} / Q for r = 0..kmax, one quenched draw."""

    pmf: np.ndarray
    qseries: QSeries


def limiting_endpoint_pmf(params: ModelParams, walk: WalkSample, kmax: int,
                          epsilon: float = 1e-10) -> LimitingPmf:
    """The limiting random endpoint pmf on 0..kmax; flags ride on qseries."""
    if kmax < 0:
        raise ValueError("kmax must be nonnegative")
    qs = q_partial(params, walk, epsilon)
    walk = extend_walk(walk, kmax)
    with np.errstate(under="ignore"):
        pmf = np.exp(-walk.values[: kmax + 1]) / qs.q
    return LimitingPmf(pmf, qs)


# ---------------------------------------------------------------------------
# appendix checks


@dataclass(frozen=True)
class MaximalBoundReport:
    steps: int
    empirical: float
    bound: float
    mc_sd: float

    @property
    def holds(self) -> bool:
        return self.empirical <= self.bound + 3.0 * self.mc_sd


def maximal_inequality_check(params: ModelParams, m: int, n: int, lam: float,
                             samples: int, seed: int = 0,
                             stream: int = 0) -> MaximalBoundReport:
    """Empirical P(min_{k <= m sqrt(n)} S_k <= -lam) against m sqrt(n) gamma / lam^2."""
    if m <= 0 or n <= 0 or lam <= 0.0 or samples <= 0:
        raise ValueError("arguments must be positive")
    steps = int(math.floor(m * math.sqrt(n)))
    gamma = constants(params).walk_increment_var
    bound = steps * gamma / lam**2
    inc = walk_increment_matrix(params, samples, steps, seed, stream)
    dips = np.cumsum(inc, axis=1).min(axis=1) <= -lam
    p_hat = float(dips.mean())
    mc_sd = math.sqrt(max(p_hat * (1.0 - p_hat), 1.0 / samples) / samples)
    return MaximalBoundReport(steps, p_hat, bound, mc_sd)


@dataclass(frozen=True)
class DoubleLimitTable:
    """Tail-mass ratios sum_{r=k}^{n} e^{-S_r} / sum_{r=0}^{n} e^{-S_r}."""

    k_grid: tuple[int, ...]
    n_grid: tuple[int, ...]
    ratios: np.ndarray         # (samples, len(k_grid), len(n_grid))

    @property
    def means(self) -> np.ndarray:
        return self.ratios.mean(axis=0)

    def fraction_below(self, threshold: float) -> np.ndarray:
        return (self.ratios < threshold).mean(axis=0)


def double_limit_check(params: ModelParams, k_grid, n_grid, samples: int,
                       seed: int = 0, stream: int = 0) -> DoubleLimitTable:
    """Monte Carlo table of the tail ratios over a (k, n) grid."""
    k_grid = tuple(int(k) for k in k_grid)
    n_grid = tuple(int(n) for n in n_grid)
    if list(k_grid) != sorted(k_grid) or list(n_grid) != sorted(n_grid):
        raise ValueError("grids must be increasing")
    if min(k_grid) < 0 or min(n_grid) < 1 or max(k_grid) > max(n_grid):
        raise ValueError("need 0 <= k <= n")
    n_max = max(n_grid)
    inc = walk_increment_matrix(params, samples, n_max, seed, stream)
    s = np.concatenate([np.zeros((samples, 1)), np.cumsum(inc, axis=1)], axis=1)
    w = np.exp(-s)
    csum = np.cumsum(w, axis=1)
    ratios = np.empty((samples, len(k_grid), len(n_grid)))
    for a, k in enumerate(k_grid):
        head = csum[:, k - 1] if k > 0 else 0.0
        for b, n in enumerate(n_grid):
            if k > n:
                ratios[:, a, b] = 0.0
            else:
                total = csum[:, n]
                ratios[:, a, b] = (total - head) / total
    return DoubleLimitTable(k_grid, n_grid, ratios)
