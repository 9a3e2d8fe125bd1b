"""Closed-form moment evaluators for stationary beta-binomial and lazy chains.

Everything here is exact (up to floating point): nested finite sums for the
beta-binomial family, breakpoint-pattern sums for the lazy family, and
truncated tie-probability series with certified geometric tail bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .chains import LengthPrefix
from .specfun import log_rising_factorial

MAX_KAPPA_BB = 8
MAX_N_BB = 12
MAX_TERMS_BB = 10 ** 8
MAX_KAPPA_LAZY = 12  # outright enumeration window; the DP covers the rest
MAX_KAPPA_LAZY_DP = 10_000
MAX_SERIES_TERMS = 1000
_CHUNK = 1 << 18


@dataclass(frozen=True)
class AllocationStats:
    """Occupancy counts of an allocation vector.

    a[j-1] is the number of observations allocated to index j, b[j-1] the
    number allocated strictly beyond j; b is always derived from a.
    """

    a: tuple
    b: tuple = field(init=False)
    kappa: int = field(init=False)

    def __init__(self, a: Sequence[int]):
        a = tuple(int(x) for x in a)
        if any(x < 0 for x in a):
            raise ValueError("counts must be nonnegative, got %r" % (a,))
        tail = 0
        b = []
        for x in reversed(a):
            b.append(tail)
            tail += x
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", tuple(reversed(b)))
        object.__setattr__(self, "kappa", len(a))

    @classmethod
    def from_allocations(cls, d: Sequence[int]) -> "AllocationStats":
        """Counts for a vector of 1-based allocation labels."""
        d = [int(x) for x in d]
        if not d:
            return cls(())
        if min(d) < 1:
            raise ValueError("allocation labels are 1-based, got %r" % (min(d),))
        kappa = max(d)
        a = [0] * kappa
        for x in d:
            a[x - 1] += 1
        return cls(a)

    @property
    def n(self) -> int:
        return sum(self.a)


def _log_choose(n: int, z: np.ndarray) -> np.ndarray:
    return (math.lgamma(n + 1)
            - np.vectorize(math.lgamma)(z + 1.0)
            - np.vectorize(math.lgamma)(n - z + 1.0))


def mixed_moment_bmsb_stationary(alpha: float, beta: float, n: int,
                                 stats: AllocationStats) -> float:
    """E[prod_j v_j^a_j (1-v_j)^b_j] for the stationary beta-binomial chain.

    Evaluated as the exact nested sum over latent binomial counts, one per
    level, enumerated in chunks and accumulated in log space.
    """
    if alpha <= 0.0 or beta <= 0.0:
        raise ValueError("shape parameters must be positive")
    if n < 0 or n != int(n):
        raise ValueError("n must be a nonnegative integer, got %r" % (n,))
    n = int(n)
    kappa = stats.kappa
    if kappa == 0:
        return 1.0
    if kappa > MAX_KAPPA_BB:
        raise ValueError("kappa=%d exceeds the cap %d" % (kappa, MAX_KAPPA_BB))
    if n > MAX_N_BB:
        raise ValueError("n=%d exceeds the cap %d" % (n, MAX_N_BB))
    total = (n + 1) ** kappa
    if total > MAX_TERMS_BB:
        raise ValueError("nested sum has %d terms, cap is %d" % (total, MAX_TERMS_BB))

    a, b = stats.a, stats.b
    z = np.arange(n + 1, dtype=np.int64)
    logc = _log_choose(n, z)
    lr = log_rising_factorial

    # level-1 row: shapes (alpha, beta); later levels: (alpha+z', beta+n-z')
    t_first = np.array([logc[zj] + lr(alpha, a[0] + zj) + lr(beta, b[0] + n - zj)
                        - lr(alpha + beta, a[0] + b[0] + n) for zj in z])
    tables = [t_first]
    for j in range(1, kappa):
        tj = np.empty((n + 1, n + 1))
        for zp in z:
            ap, bp = alpha + zp, beta + n - zp
            tj[zp] = (logc + np.array([lr(ap, a[j] + zj) + lr(bp, b[j] + n - zj)
                                       for zj in z])
                      - lr(ap + bp, a[j] + b[j] + n))
        tables.append(tj)

    out = -math.inf
    for lo in range(0, total, _CHUNK):
        idx = np.arange(lo, min(lo + _CHUNK, total), dtype=np.int64)
        digits = (idx[:, None] // (n + 1) ** np.arange(kappa)) % (n + 1)
        logs = tables[0][digits[:, 0]]
        for j in range(1, kappa):
            logs = logs + tables[j][digits[:, j - 1], digits[:, j]]
        mx = logs.max()
        if mx > -math.inf:
            out = np.logaddexp(out, mx + math.log(np.exp(logs - mx).sum()))
    return float(math.exp(out))


def mixed_moment_lmsb_stationary(alpha: float, beta: float, rho: float,
                                 stats: AllocationStats) -> float:
    """E[prod_j v_j^a_j (1-v_j)^b_j] for the stationary lazy chain.

    Exact sum over all fresh/copy breakpoint patterns: each pattern
    partitions 1..kappa into blocks sharing a single beta variable.
    Patterns are enumerated outright for small kappa; past that the same
    sum is folded by a quadratic recursion over the last block.
    """
    if alpha <= 0.0 or beta <= 0.0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1], got %r" % (rho,))
    kappa = stats.kappa
    if kappa == 0:
        return 1.0
    if kappa > MAX_KAPPA_LAZY_DP:
        raise ValueError("kappa=%d exceeds the cap %d" % (kappa, MAX_KAPPA_LAZY_DP))

    a, b = stats.a, stats.b
    lr = log_rising_factorial
    # block moment for levels l..r inclusive (0-based), from cumulative counts
    ca = [0] * (kappa + 1)
    cb = [0] * (kappa + 1)
    for j in range(kappa):
        ca[j + 1] = ca[j] + a[j]
        cb[j + 1] = cb[j] + b[j]

    def block(lo: int, hi: int) -> float:
        big_a = ca[hi + 1] - ca[lo]
        big_b = cb[hi + 1] - cb[lo]
        return lr(alpha, big_a) + lr(beta, big_b) - lr(alpha + beta, big_a + big_b)

    if kappa > MAX_KAPPA_LAZY:
        # fold over the position where the last block starts (1-based s)
        val = [1.0] + [0.0] * kappa
        for e in range(1, kappa + 1):
            acc = rho ** (e - 1) * math.exp(block(0, e - 1))
            for s in range(2, e + 1):
                acc += (val[s - 1] * math.exp(block(s - 1, e - 1))
                        * rho ** (e - s) * (1.0 - rho))
            val[e] = acc
        return val[kappa]

    total = 0.0
    for mask in range(1 << (kappa - 1)):
        cuts = [0] + [j + 1 for j in range(kappa - 1) if mask >> j & 1] + [kappa]
        r = len(cuts) - 1
        logm = sum(block(cuts[i], cuts[i + 1] - 1) for i in range(r))
        total += rho ** (kappa - r) * (1.0 - rho) ** (r - 1) * math.exp(logm)
    return total


def allocation_logprob_given_v(prefix: LengthPrefix, stats: AllocationStats) -> float:
    """log p(d | v) = sum_j a_j log v_j + b_j log(1-v_j)."""
    v = prefix.values
    if stats.kappa > v.shape[0]:
        raise ValueError("stats cover %d levels but the prefix has %d"
                         % (stats.kappa, v.shape[0]))
    out = 0.0
    for j in range(stats.kappa):
        aj, bj = stats.a[j], stats.b[j]
        vj = float(v[j])
        if aj:
            if vj <= 0.0:
                return -math.inf
            out += aj * math.log(vj)
        if bj:
            if vj >= 1.0:
                return -math.inf
            out += bj * math.log1p(-vj)
    return out


class TieSeries(NamedTuple):
    value: float
    tail_bound: float
    n_terms: int
    converged: bool


def _tie_series_bmsb(alpha: float, beta: float, n: int, j_max: int,
                     target: float) -> TieSeries:
    z = np.arange(n + 1, dtype=np.int64)
    logc = _log_choose(n, z)
    lr = log_rising_factorial
    # state over the latent binomial count, carrying E[prod (1-v_l)^2 , z_j = z]
    mu = np.array([math.exp(logc[zj] + lr(alpha, zj) + lr(beta, n - zj + 2)
                            - lr(alpha + beta, n + 2)) for zj in z])
    trans = np.empty((n + 1, n + 1))
    for zp in z:
        ap, bp = alpha + zp, beta + n - zp
        trans[zp] = np.exp(logc + np.array([lr(ap, zj) + lr(bp, n - zj + 2)
                                            for zj in z])
                           - lr(ap + bp, n + 2))
    fin = (alpha + z) * (alpha + z + 1.0) / ((alpha + beta + n) * (alpha + beta + n + 1.0))

    value = alpha * (alpha + 1.0) / ((alpha + beta) * (alpha + beta + 1.0))
    for _ in range(j_max - 1):
        value += float(mu @ fin)
        mu = mu @ trans
    r = ((beta + n) * (beta + n + 1.0)
         / ((alpha + beta + n) * (alpha + beta + n + 1.0)))
    bound = float(mu.sum()) / (1.0 - r)
    return TieSeries(value, bound, j_max, bound <= target)


def _tie_series_lmsb(alpha: float, beta: float, rho: float, j_max: int,
                     target: float) -> TieSeries:
    lr = log_rising_factorial
    ab = alpha + beta

    def g(k: int) -> float:  # E[(1-v)^{2k}]
        return math.exp(lr(beta, 2 * k) - lr(ab, 2 * k))

    def h(c: int) -> float:  # E[v^2 (1-v)^{2(c-1)}]
        return math.exp(lr(alpha, 2) + lr(beta, 2 * c - 2) - lr(ab, 2 * c))

    gs = [0.0] + [g(k) for k in range(1, j_max + 1)]
    hs = [0.0] + [h(c) for c in range(1, j_max + 1)]
    w = [1.0] + [0.0] * j_max
    for m in range(1, j_max + 1):
        acc = rho ** (m - 1) * gs[m]
        for k in range(1, m):
            acc += rho ** (k - 1) * (1.0 - rho) * gs[k] * w[m - k]
        w[m] = acc

    value = 0.0
    for j in range(1, j_max + 1):
        term = rho ** (j - 1) * hs[j]
        for c in range(1, j):
            term += w[j - c] * (1.0 - rho) * rho ** (c - 1) * hs[c]
        value += term
    r = rho + (1.0 - rho) * beta * (beta + 1.0) / (ab * (ab + 1.0))
    bound = w[j_max] / (1.0 - r) if r < 1.0 else math.inf
    return TieSeries(value, bound, j_max, bound <= target)


def tie_probability_series(family: str, alpha: float, beta: float, *,
                           n: Optional[int] = None, rho: Optional[float] = None,
                           truncation: int = 200,
                           tail_bound_target: float = 1e-10) -> TieSeries:
    """Truncated series for the tie probability of a stationary chain.

    family is "bmsb_stationary" (requires n) or "lmsb_stationary" (requires
    rho).  Returns the partial sum, a certified bound on the dropped tail,
    the number of terms used, and whether the bound met the target.
    """
    if alpha <= 0.0 or beta <= 0.0:
        raise ValueError("shape parameters must be positive")
    if not 1 <= truncation <= MAX_SERIES_TERMS:
        raise ValueError("truncation must be in [1, %d]" % (MAX_SERIES_TERMS,))
    if family == "bmsb_stationary":
        if n is None or n < 0 or n != int(n):
            raise ValueError("bmsb_stationary requires a nonnegative integer n")
        return _tie_series_bmsb(alpha, beta, int(n), truncation, tail_bound_target)
    if family == "lmsb_stationary":
        if rho is None or not 0.0 <= rho <= 1.0:
            raise ValueError("lmsb_stationary requires rho in [0, 1]")
        return _tie_series_lmsb(alpha, beta, rho, truncation, tail_bound_target)
    raise ValueError("unknown family %r" % (family,))
