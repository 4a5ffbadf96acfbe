"""Point-to-point and point-to-line partition functions on the wedge.

The recurrence, with W the environment weights:

    Z(1,1) = W(1,1)
    Z(i,i) = W(i,i) * Z(i, i-1)                      on the diagonal
    Z(i,j) = W(i,j) * (Z(i-1,j) + Z(i,j-1))          for i > j >= 1

Z(i, j) sums weight products over upright paths from (1,1) confined to
j <= i.  log Z grows linearly in the size, so the float path works in the
log domain throughout (raw products overflow binary64 around size 150).
The exact path carries Fractions and is meant for small verification
instances only.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from . import rng
from .environment import Environment, stream_log_weights
from .special import ModelParams

NEG_INF = -np.inf


def _advance(prev, logw):
    """One anti-diagonal step; prev has length (s-1)//2, logw length s//2."""
    length = logw.shape[-1]
    shape = logw.shape[:-1]
    up = np.full(shape + (length,), NEG_INF)
    left = np.full(shape + (length,), NEG_INF)
    take = min(prev.shape[-1], length)
    up[..., :take] = prev[..., :take]
    left[..., 1:] = prev[..., : length - 1]
    return logw + np.logaddexp(up, left)


class PartitionTable:
    """Log partition values for every wedge site of one environment."""

    def __init__(self, env: Environment):
        self.env = env
        self.n = env.n
        self.diags: list[np.ndarray] = []
        logw_flat = np.log(env.w)
        prev = None
        for s in range(2, 2 * self.n + 1):
            j = np.arange(1, s // 2 + 1)
            logw = np.array([logw_flat[env.index(s - jj, jj)] for jj in j])
            if prev is None:
                cur = logw  # single site (1,1)
            else:
                cur = _advance(prev, logw)
            self.diags.append(cur)
            prev = cur

    def log_z(self, i, j) -> float:
        if not (1 <= j <= i and i + j <= 2 * self.n):
            raise KeyError(f"site ({i}, {j}) outside the wedge")
        return float(self.diags[i + j - 2][j - 1])

    def final_profile(self) -> np.ndarray:
        """log Z(n+p, n-p) for p = 0..n-1."""
        return self.diags[-1][::-1].copy()


def partition_table(env: Environment) -> PartitionTable:
    return PartitionTable(env)


def exact_partition_table(env: Environment) -> dict[tuple[int, int], Fraction]:
    """Fraction-valued table; exact because binary64 weights are dyadic."""
    z: dict[tuple[int, int], Fraction] = {}
    for i, j in env.sites():
        w = env.weight_fraction(i, j)
        if (i, j) == (1, 1):
            z[i, j] = w
        elif i == j:
            z[i, j] = w * z[i, j - 1]
        elif j == 1:
            z[i, j] = w * z[i - 1, j]
        else:
            z[i, j] = w * (z[i - 1, j] + z[i, j - 1])
    return z


def point_to_line(table: PartitionTable, m: int = 0) -> float:
    """log of the tail sum  sum_{p >= m} Z(n+p, n-p)  over the last line."""
    profile = table.final_profile()
    if not 0 <= m < table.n:
        raise ValueError("m must lie in [0, n)")
    return float(logsumexp(profile[m:]))


def endpoint_pmf(table: PartitionTable) -> np.ndarray:
    """P(endpoint = (n+p, n-p)) for p = 0..n-1 under the quenched measure."""
    profile = table.final_profile()
    return np.exp(profile - logsumexp(profile))


def increment_vector(table: PartitionTable, kmax: int) -> np.ndarray:
    """(log Z(n,n) - log Z(n+r, n-r)) for r = 0..kmax; entry 0 is 0."""
    profile = table.final_profile()
    if not 0 <= kmax < table.n:
        raise ValueError("kmax must lie in [0, n)")
    return profile[0] - profile[: kmax + 1]


def sample_path(table: PartitionTable, stream: rng.SequentialStream) -> list[tuple[int, int]]:
    """One path draw from the quenched polymer measure.

    The endpoint is drawn from `endpoint_pmf`, then the path is walked
    backwards, picking the predecessor of (i, j) with probability
    proportional to Z(i-1, j) versus Z(i, j-1).  The site weight W(i, j)
    is common to both branches and cancels.
    """
    pmf = endpoint_pmf(table)
    u = stream.uniform()
    p = int(np.searchsorted(np.cumsum(pmf), u))
    p = min(p, table.n - 1)
    i, j = table.n + p, table.n - p
    out = [(i, j)]
    while (i, j) != (1, 1):
        if j == 1:
            i -= 1
        elif i == j:
            j -= 1
        else:
            up = table.log_z(i - 1, j)
            left = table.log_z(i, j - 1)
            p_up = 1.0 / (1.0 + np.exp(left - up))
            if stream.uniform() < p_up:
                i -= 1
            else:
                j -= 1
        out.append((i, j))
    out.reverse()
    return out


def path_code(path: list[tuple[int, int]]) -> int:
    """Bit-encode a path by its moves (up = i+1 = 1), first move = lowest bit."""
    code = 0
    for k in range(1, len(path)):
        if path[k][0] == path[k - 1][0] + 1:
            code |= 1 << (k - 1)
    return code


def sample_path_codes(table: PartitionTable, count: int, seed: int, stream: int) -> np.ndarray:
    """Vectorized path sampling; returns one move-code per draw.

    Draw d consumes lane LANE_CHAIN + d, so the result is independent of
    batching.  Step q of every draw uses draw index q of its lane.
    """
    n = table.n
    lanes = rng.LANE_CHAIN + np.arange(count, dtype=np.uint64)
    keys = rng.lane_keys(seed, stream, lanes)
    cum = np.cumsum(endpoint_pmf(table))
    u0 = rng.uniforms(keys, 0)
    p = np.minimum(np.searchsorted(cum, u0), n - 1)
    i = n + p
    j = n - p
    codes = np.zeros(count, dtype=np.int64)
    # log Z lookup grid (wedge sites only; -inf elsewhere never consulted)
    grid = np.full((2 * n + 1, n + 1), NEG_INF)
    for si, sj in table.env.sites():
        grid[si, sj] = table.log_z(si, sj)
    for step in range(2 * n - 2):
        bit = 2 * n - 3 - step  # moves recorded from the endpoint backwards
        u = rng.uniforms(keys, np.uint64(1 + step))
        up_logz = grid[np.maximum(i - 1, 1), j]
        left_logz = grid[i, np.maximum(j - 1, 1)]
        forced_up = j == 1
        forced_left = i == j
        with np.errstate(over="ignore"):
            p_up = 1.0 / (1.0 + np.exp(left_logz - up_logz))
        go_up = np.where(forced_up, True, np.where(forced_left, False, u < p_up))
        codes |= go_up.astype(np.int64) << bit
        i = np.where(go_up, i - 1, i)
        j = np.where(go_up, j, j - 1)
    return codes


def batch_final_profiles(params: ModelParams, n: int, flavor: str, seed: int,
                         streams, *, stationary_origin: str = "diagonal") -> np.ndarray:
    """log Z(n+p, n-p), p = 0..n-1, for a batch of streams at once.

    Streams the anti-diagonal recurrence without materializing the n^2
    weight field; row b of the result matches
    PartitionTable(generate_environment(..., stream=streams[b])) to
    rounding.  This is the workhorse of the large experiments.
    """
    prev = None
    for s, j, logw in stream_log_weights(params, n, flavor, seed, streams,
                                         stationary_origin=stationary_origin):
        prev = logw if prev is None else _advance(prev, logw)
    return prev[:, ::-1].copy()
