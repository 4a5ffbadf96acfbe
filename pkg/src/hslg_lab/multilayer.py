"""Multilayer symmetrized partition functions and the line ensemble.

Work happens on the symmetrized quadrant view (diagonal weights halved,
reflection otherwise).  The r-layer quantity sums the weight product over
r-tuples of pairwise vertex-disjoint upright quadrant paths

    (1, r) -> (m, n),  (1, r-1) -> (m, n-1),  ...,  (1, 1) -> (m, n-r+1)

Two independent routes are kept separate on purpose: exhaustive tuple
enumeration (small instances, exact arithmetic) and the determinant of
single-path values (Lindstrom-Gessel-Viennot).  The line ensemble stacks
log-ratios of consecutive layer counts along the staircase
(N + floor(p/2), N - ceil(p/2) + 1).
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .environment import SymmetrizedEnvironment, stream_log_weights
from .polymer import NEG_INF, _advance
from .special import ModelParams

# Exhaustive enumeration guard: r paths of m+n-r sites each.
MAX_BRUTE_CELLS = 48
MAX_BRUTE_TUPLES = 2_000_000

CANCELLATION_RATIO = 1e-8


class InstanceTooLarge(ValueError):
    pass


def fraction_log(fr: Fraction) -> float:
    """log of a positive Fraction without overflowing through float."""
    if fr <= 0:
        raise ValueError("fraction_log requires a positive value")
    return math.log(fr.numerator) - math.log(fr.denominator)


def enumerate_quadrant_paths(start, end):
    """All upright paths start -> end in the quadrant, as site tuples."""
    si, sj = start
    ei, ej = end
    if ei < si or ej < sj:
        return []
    out = []

    def walk(i, j, acc):
        if (i, j) == (ei, ej):
            out.append(tuple(acc))
            return
        if i < ei:
            acc.append((i + 1, j))
            walk(i + 1, j, acc)
            acc.pop()
        if j < ej:
            acc.append((i, j + 1))
            walk(i, j + 1, acc)
            acc.pop()

    walk(si, sj, [(si, sj)])
    return out


def _tuple_endpoints(m, n, r):
    return [((1, r - a), (m, n - a)) for a in range(r)]


def multilayer_brute(senv: SymmetrizedEnvironment, m: int, n: int, r: int) -> Fraction:
    """Exact exhaustive sum over disjoint path tuples (verification oracle)."""
    if r == 0:
        return Fraction(1)
    if r < 0 or n - r + 1 < 1:
        raise ValueError("need 1 <= r <= n")
    if r * (m + n - r) > MAX_BRUTE_CELLS:
        raise InstanceTooLarge(f"{r} paths of {m + n - r} cells exceed the enumeration cap")
    families = [enumerate_quadrant_paths(s, e) for s, e in _tuple_endpoints(m, n, r)]
    total_tuples = 1
    for fam in families:
        total_tuples *= max(len(fam), 1)
    if total_tuples > MAX_BRUTE_TUPLES:
        raise InstanceTooLarge("tuple count exceeds the enumeration cap")
    wcache: dict[tuple[int, int], Fraction] = {}

    def wf(site):
        if site not in wcache:
            wcache[site] = senv.weight_fraction(*site)
        return wcache[site]

    total = Fraction(0)
    for combo in itertools.product(*families):
        seen: set[tuple[int, int]] = set()
        ok = True
        for path in combo:
            for site in path:
                if site in seen:
                    ok = False
                    break
                seen.add(site)
            if not ok:
                break
        if not ok:
            continue
        prod = Fraction(1)
        for site in seen:
            prod *= wf(site)
        total += prod
    return total


def quadrant_log_table(senv: SymmetrizedEnvironment, start_col: int,
                       imax: int, jmax: int) -> np.ndarray:
    """log Zq((1, start_col) -> (i, j)) on [1..imax] x [1..jmax] (float path).

    Index [i, j]; unreachable sites stay at -inf.  Cells past the wedge
    boundary i + j = 2n have no weight and stay at -inf; they can only
    feed other out-of-bound cells, so skipping them is exact.
    """
    bound = 2 * senv.n
    t = np.full((imax + 1, jmax + 1), NEG_INF)
    if start_col <= min(jmax, bound - 1):
        t[1, start_col] = senv.log_weight(1, start_col)
    for j in range(start_col + 1, min(jmax, bound - 1) + 1):
        t[1, j] = senv.log_weight(1, j) + t[1, j - 1]
    for i in range(2, imax + 1):
        # the left neighbour is in the same row, so the scan is sequential
        for j in range(1, min(jmax, bound - i) + 1):
            left = t[i, j - 1] if j > 1 else NEG_INF
            prev = np.logaddexp(t[i - 1, j], left)
            if prev > NEG_INF:
                t[i, j] = senv.log_weight(i, j) + prev
    return t


def quadrant_exact_table(senv: SymmetrizedEnvironment, start_col: int,
                         imax: int, jmax: int) -> dict[tuple[int, int], Fraction]:
    bound = 2 * senv.n
    z: dict[tuple[int, int], Fraction] = {}
    for i in range(1, imax + 1):
        for j in range(1, min(jmax, bound - i) + 1):
            w = senv.weight_fraction(i, j)
            if i == 1 and j == start_col:
                z[i, j] = w
            else:
                up = z.get((i - 1, j), Fraction(0))
                left = z.get((i, j - 1), Fraction(0)) if j > start_col else Fraction(0)
                if up == 0 and left == 0:
                    continue
                z[i, j] = w * (up + left)
    return z


def _perm_sign(perm) -> int:
    inv = 0
    for a in range(len(perm)):
        for b in range(a + 1, len(perm)):
            if perm[a] > perm[b]:
                inv += 1
    return -1 if inv % 2 else 1


def exact_det(matrix: list[list[Fraction]]) -> Fraction:
    r = len(matrix)
    total = Fraction(0)
    for perm in itertools.permutations(range(r)):
        term = Fraction(_perm_sign(perm))
        for a in range(r):
            term *= matrix[a][perm[a]]
            if term == 0:
                break
        total += term
    return total


def log_det_scaled(log_matrix: np.ndarray) -> float:
    """log of det(exp(log_matrix)) via row scaling; warns near cancellation.

    The determinants assembled here are sums over disjoint path tuples and
    must be positive; a non-positive float determinant raises.
    """
    r = log_matrix.shape[0]
    rowmax = np.max(log_matrix, axis=1)
    if np.any(rowmax == NEG_INF):
        return NEG_INF
    m = np.exp(log_matrix - rowmax[:, None])
    det = float(np.linalg.det(m))
    hadamard = float(np.prod(np.linalg.norm(m, axis=1)))
    if hadamard > 0 and abs(det) < CANCELLATION_RATIO * hadamard:
        warnings.warn("determinant suffered >1e8 cancellation; log value unreliable",
                      RuntimeWarning, stacklevel=2)
    if det <= 0.0:
        raise FloatingPointError("non-positive determinant in float mode")
    return float(np.sum(rowmax) + np.log(det))


def multilayer_lgv(senv: SymmetrizedEnvironment, m: int, n: int, r: int,
                   mode: str = "float"):
    """r-layer value via the determinant of single-path quadrant values.

    Exact mode returns a Fraction, float mode the log value.
    """
    if r == 0:
        return Fraction(1) if mode == "exact" else 0.0
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r <= n")
    ends = [(m, n - b) for b in range(r)]
    if mode == "exact":
        tables = [quadrant_exact_table(senv, r - a, m, n) for a in range(r)]
        matrix = [[tables[a].get(end, Fraction(0)) for end in ends] for a in range(r)]
        return exact_det(matrix)
    if mode != "float":
        raise ValueError("mode must be 'float' or 'exact'")
    tables = [quadrant_log_table(senv, r - a, m, n) for a in range(r)]
    logm = np.array([[tables[a][end] for end in ends] for a in range(r)])
    return log_det_scaled(logm)


def single_symmetrized(senv: SymmetrizedEnvironment, m: int, n: int, mode: str = "float"):
    return multilayer_lgv(senv, m, n, 1, mode=mode)


def diag_avoiding_exact(senv: SymmetrizedEnvironment, m: int, n: int) -> Fraction:
    """Paths (1,1)->(m,n), m != n, meeting the diagonal only at (1,1).

    Such a path commits to one side at its first step; by reflection
    symmetry of the weights we evaluate the below-diagonal side.
    """
    if m == n:
        raise ValueError("diagonal-avoiding value needs m != n")
    if n > m:
        m, n = n, m
    bound = 2 * senv.n
    z: dict[tuple[int, int], Fraction] = {}
    w11 = senv.weight_fraction(1, 1)
    for i in range(2, m + 1):
        for j in range(1, min(i - 1, n, bound - i) + 1):
            w = senv.weight_fraction(i, j)
            if (i, j) == (2, 1):
                z[i, j] = w * w11
                continue
            up = z.get((i - 1, j), Fraction(0)) if i - 1 > j else Fraction(0)
            left = z.get((i, j - 1), Fraction(0))
            z[i, j] = w * (up + left)
    return z.get((m, n), Fraction(0))


def diag_avoiding_log_table(senv: SymmetrizedEnvironment, imax: int, jmax: int) -> np.ndarray:
    """log of the diagonal-avoiding values on the strict lower triangle."""
    bound = 2 * senv.n
    t = np.full((imax + 1, jmax + 1), NEG_INF)
    if imax < 2:
        return t
    w11 = senv.log_weight(1, 1)
    for i in range(2, imax + 1):
        for j in range(1, min(i - 1, jmax, bound - i) + 1):
            w = senv.log_weight(i, j)
            if (i, j) == (2, 1):
                t[i, j] = w + w11
                continue
            up = t[i - 1, j] if i - 1 > j else NEG_INF
            left = t[i, j - 1] if j > 1 else NEG_INF
            t[i, j] = w + np.logaddexp(up, left)
    return t


def vq_exact(senv: SymmetrizedEnvironment, q: int) -> Fraction:
    """V_q: symmetrized values summed over wedge sites of the line i+j = q."""
    if q < 2:
        raise ValueError("q must be >= 2")
    table = quadrant_exact_table(senv, 1, q - 1, q // 2)
    total = Fraction(0)
    for j in range(1, q // 2 + 1):
        total += table.get((q - j, j), Fraction(0))
    return total


def vq_tilde_exact(senv: SymmetrizedEnvironment, q: int) -> Fraction:
    """Diagonal-avoiding analog of V_q over strict-wedge sites of i+j = q."""
    if q < 3:
        raise ValueError("q must be >= 3")
    total = Fraction(0)
    for j in range(1, (q - 1) // 2 + 1):
        total += _diag_avoiding_exact_cached(senv, q - j, j)
    return total


def vq_log(senv: SymmetrizedEnvironment, q: int) -> float:
    """log V_q (float route)."""
    if q < 2:
        raise ValueError("q must be >= 2")
    table = quadrant_log_table(senv, 1, q - 1, q // 2)
    vals = [table[q - j, j] for j in range(1, q // 2 + 1)]
    return float(np.logaddexp.reduce(vals))


def vq_tilde_log(senv: SymmetrizedEnvironment, q: int) -> float:
    if q < 3:
        raise ValueError("q must be >= 3")
    table = diag_avoiding_log_table(senv, q - 1, (q - 1) // 2)
    vals = [table[q - j, j] for j in range(1, (q - 1) // 2 + 1)]
    return float(np.logaddexp.reduce(vals))


def _diag_avoiding_exact_cached(senv, m, n):
    cache = getattr(senv, "_davoid_cache", None)
    if cache is None or cache[0] < m:
        bound = 2 * senv.n
        z: dict[tuple[int, int], Fraction] = {}
        w11 = senv.weight_fraction(1, 1)
        for i in range(2, m + 1):
            for j in range(1, min(i - 1, bound - i) + 1):
                w = senv.weight_fraction(i, j)
                if (i, j) == (2, 1):
                    z[i, j] = w * w11
                    continue
                up = z.get((i - 1, j), Fraction(0)) if i - 1 > j else Fraction(0)
                left = z.get((i, j - 1), Fraction(0))
                z[i, j] = w * (up + left)
        senv._davoid_cache = (m, z)
        cache = senv._davoid_cache
    return cache[1].get((m, n), Fraction(0))


@dataclass
class LineEnsemble:
    """Curves H(k, p), k = 1..kmax, p = 1..2n-2k+2 (stored 0-indexed in p)."""

    n: int
    kmax: int
    curves: list[np.ndarray]

    def positions(self, k: int) -> int:
        return 2 * self.n - 2 * k + 2

    def h(self, k: int, p: int) -> float:
        if not 1 <= k <= self.kmax:
            raise KeyError(f"curve {k} not built")
        if not 1 <= p <= self.positions(k):
            raise KeyError(f"position {p} outside curve {k}")
        return float(self.curves[k - 1][p - 1])


def staircase_site(n: int, p: int) -> tuple[int, int]:
    """Lattice point read by ensemble position p: (n + p//2, n - (p+1)//2 + 1)."""
    return n + p // 2, n - (p + 1) // 2 + 1


def line_ensemble(senv: SymmetrizedEnvironment, kmax: int, mode: str = "float",
                  order: int | None = None) -> LineEnsemble:
    """Build curves 1..kmax: H(k, p) = log 2 + log(layer_k / layer_{k-1}).

    Even staircase positions read lattice points on the line i + j = 2*order
    + 1, one past the order's own anti-diagonal, so the ensemble of a given
    order needs an environment one size larger; by default the order is the
    environment size minus one.

    Float mode assembles k x k determinants from per-start quadrant tables;
    exact mode uses Fractions (small sizes only).
    """
    n = order if order is not None else senv.n - 1
    if n < 1:
        raise ValueError("ensemble order must be >= 1 (environment size >= 2)")
    if 2 * n + 1 > 2 * senv.n:
        raise ValueError("environment too small for this ensemble order")
    if not 1 <= kmax <= n:
        raise ValueError("kmax must lie in [1, order]")
    imax, jmax = 2 * n, n + 1
    etables: dict[int, dict] = {}
    if mode == "float":
        tables = [quadrant_log_table(senv, c, imax, jmax) for c in range(1, kmax + 1)]
    elif mode == "exact":
        etables = {c: quadrant_exact_table(senv, c, imax, jmax) for c in range(1, kmax + 1)}
    else:
        raise ValueError("mode must be 'float' or 'exact'")

    def exact_layer_log(k: int, ends) -> float:
        for c in range(1, k + 1):
            if c not in etables:
                etables[c] = quadrant_exact_table(senv, c, imax, jmax)
        matrix = [[etables[k - a].get(e, Fraction(0)) for e in ends] for a in range(k)]
        det = exact_det(matrix)
        return fraction_log(det) if det > 0 else NEG_INF

    def layer_log(k: int, m: int, ncol: int) -> float:
        if k == 0:
            return 0.0
        ends = [(m, ncol - b) for b in range(k)]
        if mode == "exact":
            return exact_layer_log(k, ends)
        logm = np.array([[tables[k - a - 1][e] for e in ends] for a in range(k)])
        # deep layers cancel catastrophically in float; weights are binary
        # rationals, so the exact route is always available as a fallback
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", RuntimeWarning)
                return log_det_scaled(logm)
        except (FloatingPointError, RuntimeWarning):
            return exact_layer_log(k, ends)

    curves = []
    for k in range(1, kmax + 1):
        vals = np.empty(2 * n - 2 * k + 2)
        for p in range(1, 2 * n - 2 * k + 3):
            m, ncol = staircase_site(n, p)
            vals[p - 1] = math.log(2.0) + layer_log(k, m, ncol) - layer_log(k - 1, m, ncol)
        curves.append(vals)
    return LineEnsemble(n=n, kmax=kmax, curves=curves)


def batch_diag_avoiding_profiles(params: ModelParams, n: int, flavor: str,
                                 seed: int, streams) -> np.ndarray:
    """log of diagonal-avoiding values at (n+p, n-p), p = 1..n-1, batched.

    Streams the strict-lower-wedge recurrence the same way the polymer
    batch does; the (1,1) weight enters once, halved, at the (2,1) seed.
    """
    if n < 2:
        raise ValueError("diagonal-avoiding profile needs n >= 2")
    prev = None
    w11 = None
    for s, j, logw in stream_log_weights(params, n, flavor, seed, streams):
        cols = (s - 1) // 2  # strict lower triangle on this line
        if s == 2:
            w11 = logw[:, 0] - math.log(2.0)
            prev = None
            continue
        cur = np.full((logw.shape[0], cols), NEG_INF)
        if s == 3:
            cur[:, 0] = logw[:, 0] + w11
        else:
            up = np.full_like(cur, NEG_INF)
            take = min(prev.shape[1], cols)  # up-step legal while i-1 > j
            up[:, :take] = prev[:, :take]
            left = np.full_like(cur, NEG_INF)
            left[:, 1:] = prev[:, : cols - 1]
            cur = logw[:, :cols] + np.logaddexp(up, left)
        prev = cur
    return prev[:, ::-1].copy()
