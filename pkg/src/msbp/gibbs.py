"""Full-conditional updates for posterior inference on the length variables.

Beta-Binomial chains are updated through their latent counts z_1..z_m plus
exact (stationary) or slice-sampled (non-stationary) coordinate draws, with a
grid update for N.  Lazy chains are updated either site by site, where the
conditional is a mixture of two copy atoms and a fresh Beta draw, or block
wise through the fresh value behind each run of copies, with a conjugate Beta
update for the copy probability.  A generic unit-interval slice sampler
covers every non-conjugate density that shows up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from .chains import LengthPrefix
from .moments import AllocationStats
from .rng import as_generator
from .specfun import (
    MarginalSeq,
    beta_logpdf,
    log_rising_factorial,
    transport,
    upsilon,
    upsilon_inv,
)

__all__ = [
    "GibbsState",
    "bmsb_update_z",
    "bmsb_update_v",
    "bmsb_update_N",
    "lmsb_update_vj",
    "lmsb_update_vstar_block",
    "lmsb_update_rho",
    "lmsb_site_conditional",
    "SiteConditional",
    "ensure_prefix",
    "slice_sample_unit",
]

# copy atoms closer than this collapse to a single point mass
DELTA_TOL = 1e-12


@dataclass
class GibbsState:
    """Mutable per-chain sampler state.

    ``hyper`` is the Beta-Binomial count N (a nonnegative integer) or the
    lazy copy probability rho.  ``hyper_prior`` is a pmf vector over
    {0..N_max} for the N update, or a (a, b) Beta-shape pair for the rho
    update; leave it None when the hyperparameter stays fixed.  The latent
    record in ``prefix.aux`` marks the family: integer counts for
    Beta-Binomial, fresh/copy flags for lazy.
    """

    marg: MarginalSeq
    prefix: LengthPrefix
    stats: AllocationStats
    hyper: Union[int, float]
    hyper_prior: Optional[object] = None

    def __post_init__(self):
        if len(self.prefix) < max(self.stats.kappa, 1):
            raise ValueError(
                "prefix length %d is shorter than the occupied range %d"
                % (len(self.prefix), self.stats.kappa)
            )


def _counts(stats: AllocationStats, j: int):
    if j <= stats.kappa:
        return stats.a[j - 1], stats.b[j - 1]
    return 0, 0


def _check_bb(state: GibbsState) -> int:
    aux = state.prefix.aux
    if aux is None or aux.dtype != np.int64:
        raise ValueError("state carries no beta-binomial count record")
    if len(aux) != len(state.prefix):
        raise ValueError("count record length does not match the prefix")
    n = state.hyper
    if not float(n).is_integer() or n < 0:
        raise ValueError("N must be a nonnegative integer, got %r" % (n,))
    return int(n)


def _check_lazy(state: GibbsState) -> float:
    aux = state.prefix.aux
    if aux is None or aux.dtype != np.bool_:
        raise ValueError("state carries no lazy copy-flag record")
    if len(aux) != len(state.prefix) or not aux[0]:
        raise ValueError("copy-flag record is inconsistent with the prefix")
    rho = float(state.hyper)
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1], got %r" % (rho,))
    return rho


def _xlogy(k, p) -> float:
    """k * log(p) with 0 * log(0) = 0; -inf when k > 0 and p <= 0."""
    if k == 0:
        return 0.0
    if p <= 0.0:
        return -math.inf
    return k * math.log(p)


def _log_or_ninf(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf


def _log_binom_row(n: int) -> np.ndarray:
    """log C(n, k) for k = 0..n."""
    out = np.zeros(n + 1)
    for k in range(1, n + 1):
        out[k] = out[k - 1] + math.log(n - k + 1) - math.log(k)
    return out


def _log_rising_row(x: float, n: int) -> np.ndarray:
    """log (x)_k for k = 0..n."""
    out = np.zeros(n + 1)
    for k in range(1, n + 1):
        out[k] = out[k - 1] + math.log(x + k - 1)
    return out


def _sample_logits(logw: np.ndarray, rng) -> int:
    top = float(np.max(logw))
    if not math.isfinite(top):
        raise ValueError("every candidate weight vanished")
    p = np.exp(logw - top)
    p /= p.sum()
    k = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
    return min(k, len(p) - 1)


def _interior(x: float) -> float:
    return min(max(float(x), 1e-12), 1.0 - 1e-12)


# --------------------------------------------------------------------------
# Beta-Binomial family
# --------------------------------------------------------------------------

def bmsb_update_z(state: GibbsState, rng=None) -> GibbsState:
    """Resample the latent counts given the length variables.

    Interior counts are conditionally independent categoricals on {0..N};
    the final count, having no successor to constrain it, is Binomial.
    """
    rng = as_generator(rng)
    n_tot = _check_bb(state)
    v = state.prefix.values
    z = state.prefix.aux
    m = len(v)
    if n_tot == 0:
        z[:] = 0
        return state
    lbin = _log_binom_row(n_tot)
    zs = np.arange(n_tot + 1)
    for j in range(1, m):
        u = float(upsilon(state.marg, j, v[j - 1]))
        a2, b2 = state.marg.shape(j + 1)
        s_up = u * float(v[j])
        s_dn = (1.0 - u) * (1.0 - float(v[j]))
        logw = lbin - _log_rising_row(a2, n_tot) - _log_rising_row(b2, n_tot)[::-1]
        if s_up > 0.0:
            logw = logw + zs * math.log(s_up)
        else:
            logw = np.where(zs == 0, logw, -np.inf)
        if s_dn > 0.0:
            logw = logw + (n_tot - zs) * math.log(s_dn)
        else:
            logw = np.where(zs == n_tot, logw, -np.inf)
        z[j - 1] = _sample_logits(logw, rng)
    u = float(upsilon(state.marg, m, v[m - 1]))
    z[m - 1] = int(rng.binomial(n_tot, u))
    return state


def bmsb_update_v(state: GibbsState, rng=None) -> GibbsState:
    """Resample every length variable given the counts.

    Stationary marginals admit exact independent Beta draws; otherwise each
    coordinate takes one slice-sampler transition on its conditional.
    """
    rng = as_generator(rng)
    n_tot = _check_bb(state)
    v = state.prefix.values
    z = state.prefix.aux
    stationary = state.marg.is_constant()
    for j in range(1, len(v) + 1):
        aj, bj = state.marg.shape(j)
        zprev = int(z[j - 2]) if j > 1 else 0
        ap = aj + zprev
        bp = bj + (n_tot - zprev if j > 1 else 0)
        ca, cb = _counts(state.stats, j)
        zj = int(z[j - 1])
        if stationary or n_tot == 0:
            # with no latent counts the coupling terms vanish for any marginals
            v[j - 1] = rng.beta(ap + zj + ca, bp + n_tot - zj + cb)
            continue
        ld = _bmsb_site_logdensity(state.marg, j, ap + ca, bp + cb, zj, n_tot)
        x0 = _interior(v[j - 1])
        if not math.isfinite(ld(x0)):
            x0 = _interior(rng.beta(ap + ca + zj, bp + cb + n_tot - zj))
        v[j - 1] = slice_sample_unit(ld, x0, 1, rng)
    return state


def _bmsb_site_logdensity(marg, j, a_exp, b_exp, zj, n_tot):
    def ld(x):
        out = (a_exp - 1.0) * math.log(x) + (b_exp - 1.0) * math.log1p(-x)
        if zj or n_tot > zj:
            u = float(upsilon(marg, j, x))
            out += _xlogy(zj, u) + _xlogy(n_tot - zj, 1.0 - u)
        return out

    return ld


def _bmsb_n_logpmf(state: GibbsState) -> np.ndarray:
    """Unnormalized log pmf of N over the prior grid (restricted support)."""
    _check_bb(state)
    pmf = np.asarray(state.hyper_prior, dtype=float)
    if pmf.ndim != 1 or pmf.size == 0 or np.any(pmf < 0.0) or not pmf.sum() > 0.0:
        raise ValueError("hyper_prior must be a nonnegative pmf over {0..N_max}")
    v = state.prefix.values
    z = state.prefix.aux
    m = len(v)
    zmax = int(z.max())
    us = [float(upsilon(state.marg, j, v[j - 1])) for j in range(1, m + 1)]
    logp = np.full(pmf.size, -np.inf)
    for n_cand in range(zmax, pmf.size):
        if pmf[n_cand] == 0.0:
            continue
        acc = math.log(pmf[n_cand])
        lbin = _log_binom_row(n_cand)
        for j in range(1, m + 1):
            aj, bj = state.marg.shape(j)
            zprev = int(z[j - 2]) if j > 1 else 0
            ap = aj + zprev
            bp = bj + (n_cand - zprev if j > 1 else 0)
            acc += float(beta_logpdf(float(v[j - 1]), ap, bp))
            zj = int(z[j - 1])
            acc += lbin[zj] + _xlogy(zj, us[j - 1]) + _xlogy(n_cand - zj, 1.0 - us[j - 1])
        logp[n_cand] = acc
    return logp


def bmsb_update_N(state: GibbsState, rng=None) -> GibbsState:
    """Resample N from its prior grid restricted to N >= max_j z_j."""
    rng = as_generator(rng)
    logp = _bmsb_n_logpmf(state)
    state.hyper = _sample_logits(logp, rng)
    return state


# --------------------------------------------------------------------------
# lazy family
# --------------------------------------------------------------------------

class SiteConditional(NamedTuple):
    """Mixed conditional of one lazy coordinate given its neighbours.

    ``weights`` holds the normalized masses of (left copy atom, right
    preimage atom, fresh Beta component); absent components get weight 0.
    ``degenerate`` marks the collapse case where both atoms coincide and the
    conditional is a point mass at ``left``.
    """

    weights: np.ndarray
    left: Optional[float]
    right: Optional[float]
    degenerate: bool


def lmsb_site_conditional(state: GibbsState, j: int) -> SiteConditional:
    """Atoms and normalized weights of the site-j full conditional.

    The left atom copies the neighbour forward, the right atom is the
    preimage of the next coordinate under the transport map, and the fresh
    component is Be(alpha_j + a_j, beta_j + b_j).  The shared density factor
    of the right neighbour cancels in the normalization, so the remaining
    weights are rho times the occupancy likelihood at each atom against
    (1 - rho) times the integrated occupancy likelihood.
    """
    rho = _check_lazy(state)
    v = state.prefix.values
    m = len(v)
    if not 1 <= j <= m or not float(j).is_integer():
        raise ValueError("site index must lie in 1..%d, got %r" % (m, j))
    j = int(j)
    aj, bj = state.marg.shape(j)
    ca, cb = _counts(state.stats, j)
    y = float(upsilon(state.marg, j - 1, float(v[j - 2]))) if j > 1 else None
    x = float(upsilon_inv(state.marg, j, float(v[j]))) if j < m else None
    if y is not None and x is not None and abs(y - x) < DELTA_TOL:
        return SiteConditional(np.array([1.0, 0.0, 0.0]), y, x, True)
    lr = _log_or_ninf(rho)
    logw = np.array(
        [
            lr + _xlogy(ca, y) + _xlogy(cb, 1.0 - y) if y is not None else -math.inf,
            lr + _xlogy(ca, x) + _xlogy(cb, 1.0 - x) if x is not None else -math.inf,
            _log_or_ninf(1.0 - rho)
            + log_rising_factorial(aj, ca)
            + log_rising_factorial(bj, cb)
            - log_rising_factorial(aj + bj, ca + cb),
        ]
    )
    top = float(np.max(logw))
    if not math.isfinite(top):
        raise ValueError("site %d conditional has no component with mass" % j)
    w = np.exp(logw - top)
    return SiteConditional(w / w.sum(), y, x, False)


def lmsb_update_vj(state: GibbsState, j: int, rng=None) -> GibbsState:
    """Resample one lazy coordinate from its mixed conditional.

    Copy flags on both sides are refreshed to record the branch taken, so the
    breakpoint pattern always reflects the sampler's own choices rather than
    float comparisons of transported values.
    """
    rng = as_generator(rng)
    cond = lmsb_site_conditional(state, j)
    v = state.prefix.values
    flags = state.prefix.aux
    m = len(v)
    j = int(j)
    if cond.degenerate:
        v[j - 1] = cond.left
        flags[j - 1] = False
        flags[j] = False
        return state
    pick = min(int(np.searchsorted(np.cumsum(cond.weights), rng.random(), side="right")), 2)
    if pick == 0:
        v[j - 1] = cond.left
    elif pick == 1:
        v[j - 1] = cond.right
    else:
        aj, bj = state.marg.shape(j)
        ca, cb = _counts(state.stats, j)
        v[j - 1] = rng.beta(aj + ca, bj + cb)
    if j > 1:
        flags[j - 1] = pick != 0
    if j < m:
        flags[j] = pick != 1
    return state


def lmsb_update_vstar_block(state: GibbsState, rng=None) -> GibbsState:
    """Resample the fresh value behind each run of copies, then the copies.

    Fresh values are conditionally independent across runs given the
    breakpoint pattern: Beta draws when the marginals are constant, one slice
    transition on the exact block density otherwise.  Copies inside a run are
    deterministic transports of the fresh value, so they are recomputed.
    """
    rng = as_generator(rng)
    _check_lazy(state)
    v = state.prefix.values
    m = len(v)
    bps = state.prefix.breakpoints()
    ends = bps[1:] + [m + 1]
    stationary = state.marg.is_constant()
    for t, nxt in zip(bps, ends):
        at, bt = state.marg.shape(t)
        if stationary:
            seg_a = sum(_counts(state.stats, j)[0] for j in range(t, nxt))
            seg_b = sum(_counts(state.stats, j)[1] for j in range(t, nxt))
            star = float(rng.beta(at + seg_a, bt + seg_b))
        else:
            ld = _lmsb_block_logdensity(state, t, nxt)
            x0 = _interior(v[t - 1])
            if not math.isfinite(ld(x0)):
                ca, cb = _counts(state.stats, t)
                x0 = _interior(rng.beta(at + ca, bt + cb))
            star = slice_sample_unit(ld, x0, 1, rng)
        v[t - 1] = star
        for j in range(t + 1, nxt):
            a2, b2 = state.marg.shape(j)
            v[j - 1] = float(transport(at, bt, a2, b2, star))
    return state


def _lmsb_block_logdensity(state: GibbsState, t: int, nxt: int):
    at, bt = state.marg.shape(t)

    def ld(x):
        ca, cb = _counts(state.stats, t)
        out = float(beta_logpdf(x, at, bt)) + _xlogy(ca, x) + _xlogy(cb, 1.0 - x)
        for j in range(t + 1, nxt):
            ca, cb = _counts(state.stats, j)
            if ca == 0 and cb == 0:
                continue
            a2, b2 = state.marg.shape(j)
            vj = float(transport(at, bt, a2, b2, x))
            out += _xlogy(ca, vj) + _xlogy(cb, 1.0 - vj)
        return out

    return ld


def lmsb_update_rho(state: GibbsState, rng=None) -> GibbsState:
    """Conjugate Beta update of the copy probability.

    With r fresh positions out of m, the posterior shapes are
    (a + m - r, b + r - 1); r >= 1 always since the first position is fresh.
    """
    rng = as_generator(rng)
    _check_lazy(state)
    if state.hyper_prior is None:
        raise ValueError("rho update needs Beta prior shapes in hyper_prior")
    a, b = state.hyper_prior
    a, b = float(a), float(b)
    if not (a > 0.0 and b > 0.0):
        raise ValueError("rho prior needs positive Beta shapes, got %r" % ((a, b),))
    m = len(state.prefix)
    r = len(state.prefix.breakpoints())
    if not b + r - 1 > 0.0:
        raise ValueError("posterior shape b + r - 1 must be positive")
    state.hyper = float(rng.beta(a + m - r, b + r - 1))
    return state


# --------------------------------------------------------------------------
# prefix maintenance
# --------------------------------------------------------------------------

def ensure_prefix(state: GibbsState, m: int, rng=None) -> GibbsState:
    """Grow or shrink the prefix to length max(m, kappa, 1).

    Growth simulates the chain forward conditionally on the stored latent
    record; shrinkage discards trailing coordinates, which is exact because
    prefix laws are consistent across lengths.
    """
    rng = as_generator(rng)
    target = max(int(m), state.stats.kappa, 1)
    v = state.prefix.values
    aux = state.prefix.aux
    if aux is None:
        raise ValueError("state has no latent record to maintain")
    cur = len(v)
    if target == cur:
        return state
    if target < cur:
        state.prefix = LengthPrefix(v[:target].copy(), aux[:target].copy())
        return state
    if aux.dtype == np.int64:
        n_tot = _check_bb(state)
        vals, zz = list(map(float, v)), list(map(int, aux))
        while len(vals) < target:
            jnext = len(vals) + 1
            a2, b2 = state.marg.shape(jnext)
            if vals[-1] >= 1.0:
                vals.append(1.0)
                zz.append(n_tot)
                continue
            nxt = float(rng.beta(a2 + zz[-1], b2 + n_tot - zz[-1]))
            vals.append(nxt)
            if n_tot == 0:
                zz.append(0)
            else:
                zz.append(int(rng.binomial(n_tot, float(upsilon(state.marg, jnext, nxt)))))
        state.prefix = LengthPrefix(np.asarray(vals), np.asarray(zz, dtype=np.int64))
    else:
        rho = _check_lazy(state)
        vals, ff = list(map(float, v)), list(map(bool, aux))
        while len(vals) < target:
            jprev = len(vals)
            if rng.random() < rho:
                vals.append(float(upsilon(state.marg, jprev, vals[-1])))
                ff.append(False)
            else:
                a2, b2 = state.marg.shape(jprev + 1)
                vals.append(float(rng.beta(a2, b2)))
                ff.append(True)
        state.prefix = LengthPrefix(np.asarray(vals), np.asarray(ff, dtype=np.bool_))
    return state


# --------------------------------------------------------------------------
# slice sampler
# --------------------------------------------------------------------------

def slice_sample_unit(logdensity, x0: float, steps: int = 1, rng=None) -> float:
    """Slice-sample a density on (0, 1): stepping out, then shrinkage.

    Returns the point reached after ``steps`` transitions, each of which
    leaves the normalized density invariant.  The density need not be
    normalized or bounded; points outside (0, 1) are treated as having zero
    density.
    """
    rng = as_generator(rng)
    x0 = float(x0)
    if not 0.0 < x0 < 1.0:
        raise ValueError("x0 must lie strictly inside (0, 1), got %r" % (x0,))
    if not float(steps).is_integer() or steps < 1:
        raise ValueError("steps must be a positive integer, got %r" % (steps,))

    def ld(t):
        if not 0.0 < t < 1.0:
            return -math.inf
        out = float(logdensity(t))
        return -math.inf if math.isnan(out) else out

    fx = ld(x0)
    if not math.isfinite(fx):
        raise ValueError("logdensity must be finite at x0")
    x = x0
    width = 0.1
    for _ in range(int(steps)):
        level = fx - rng.exponential()
        lo = x - width * rng.random()
        hi = lo + width
        while lo > 0.0 and ld(lo) > level:
            lo -= width
        while hi < 1.0 and ld(hi) > level:
            hi += width
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        for _ in range(1000):
            cand = lo + (hi - lo) * rng.random()
            fc = ld(cand)
            if fc > level:
                x, fx = cand, fc
                break
            if cand < x:
                lo = cand
            else:
                hi = cand
        else:
            raise RuntimeError("slice shrinkage failed to terminate")
    return x
