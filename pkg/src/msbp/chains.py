"""Markov chain families for the length variables of a stick-breaking prior.

Four transition families share the same Beta marginal sequence: fully
independent draws, deterministic quantile transport (each variable is a
function of the previous one), a Beta-Binomial augmentation with latent
counts, and a lazy chain that copies the transported value with some
probability and refreshes otherwise.  All of them leave v_j ~ Be(a_j, b_j)
invariant; they differ only in the joint law.

Indices j are 1-based throughout, matching the usual notation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rng import as_generator
from .specfun import MarginalSeq, reg_inc_beta, upsilon


class TransitionSpec:
    """Base tag for the transition family of a length-variable chain."""

    __slots__ = ()


@dataclass(frozen=True)
class Independent(TransitionSpec):
    """v_{j+1} drawn fresh from its marginal, ignoring v_j."""


@dataclass(frozen=True)
class CompletelyDependent(TransitionSpec):
    """v_{j+1} = Upsilon_j(v_j) deterministically."""


@dataclass(frozen=True)
class BetaBinomial(TransitionSpec):
    """Latent z_j ~ Bin(n, Upsilon_j(v_j)), then v_{j+1} ~ Be(a+z, b+n-z).

    n = 0 collapses to the independent family; large n approaches the
    completely dependent one.
    """

    n: int

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise ValueError("BetaBinomial n must be a nonnegative integer, got %r" % (self.n,))


@dataclass(frozen=True)
class Lazy(TransitionSpec):
    """Copy Upsilon_j(v_j) with probability rho, else draw fresh.

    rho = 0 collapses to the independent family, rho = 1 to the completely
    dependent one.
    """

    rho: float

    def __post_init__(self) -> None:
        if not (0.0 <= float(self.rho) <= 1.0):
            raise ValueError("Lazy rho must lie in [0, 1], got %r" % (self.rho,))


@dataclass(frozen=True)
class MsbpModel:
    """A marginal sequence, a transition family, and a seed.

    These three fields fully determine the law of the chain and, through the
    seed, every sampled trajectory: equal models give bit-for-bit equal
    output.
    """

    marg: MarginalSeq
    trans: TransitionSpec
    seed: int = 0

    def stream(self, *keys: int) -> np.random.Generator:
        return as_generator(None, self.seed, *keys)


@dataclass
class LengthPrefix:
    """First m length variables plus the family's latent record.

    ``aux`` holds the Beta-Binomial counts z_1..z_m (the last one hangs off
    the end of the prefix) or the lazy fresh/copy flags; it is None for the
    two families without latent structure.
    """

    values: np.ndarray
    aux: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.values)

    def breakpoints(self) -> list[int]:
        """1-based indices where the lazy chain drew fresh (t_1 = 1)."""
        if self.aux is None or self.aux.dtype != np.bool_:
            raise ValueError("breakpoints are only defined for lazy-chain prefixes")
        return [int(i) + 1 for i in np.flatnonzero(self.aux)]


def transition_sample(trans, marg, j, v, rng):
    """One draw of v_{j+1} given v_j = v, with the family's latent value.

    Returns (v_next, aux) where aux is the z count for BetaBinomial, the
    fresh flag for Lazy, and None otherwise.  v = 1 is absorbing for every
    family.
    """
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise ValueError("v must lie in [0, 1], got %r" % (v,))
    a, b = marg.shape(j + 1)
    if v >= 1.0:
        if isinstance(trans, BetaBinomial):
            return 1.0, trans.n
        if isinstance(trans, Lazy):
            return 1.0, False
        return 1.0, None
    if isinstance(trans, Independent):
        return float(rng.beta(a, b)), None
    if isinstance(trans, CompletelyDependent):
        return float(upsilon(marg, j, v)), None
    if isinstance(trans, BetaBinomial):
        if trans.n == 0:
            return float(rng.beta(a, b)), 0
        z = int(rng.binomial(trans.n, upsilon(marg, j, v)))
        return float(rng.beta(a + z, b + trans.n - z)), z
    if isinstance(trans, Lazy):
        rho = float(trans.rho)
        if rho >= 1.0:
            return float(upsilon(marg, j, v)), False
        if rho > 0.0 and rng.random() < rho:
            return float(upsilon(marg, j, v)), False
        return float(rng.beta(a, b)), True
    raise TypeError("unknown transition family %r" % (trans,))


def sample_prefix(model: MsbpModel, m: int, rng=None) -> LengthPrefix:
    """Sample v_1..v_m as one trajectory of the chain.

    With rng omitted the draw is a pure function of (model, m).
    """
    if m < 1:
        raise ValueError("m must be >= 1, got %r" % (m,))
    rng = as_generator(rng, model.seed)
    marg, trans = model.marg, model.trans
    a1, b1 = marg.shape(1)
    vals = np.empty(m)
    vals[0] = rng.beta(a1, b1)
    if isinstance(trans, BetaBinomial):
        aux = np.zeros(m, dtype=np.int64)
    elif isinstance(trans, Lazy):
        aux = np.zeros(m, dtype=np.bool_)
        aux[0] = True  # t_1 = 1 by convention
    else:
        aux = None
    for j in range(1, m):
        vals[j], a_j = transition_sample(trans, marg, j, vals[j - 1], rng)
        if aux is not None:
            aux[j] = a_j
    if isinstance(trans, BetaBinomial):
        # the loop stored z_j one slot late; realign so aux[j-1] = z_j, then
        # draw the dangling z_m ~ Bin(N, Upsilon_m(v_m)) off the prefix end
        z = np.empty(m, dtype=np.int64)
        z[: m - 1] = aux[1:m]
        last = vals[m - 1]
        if last >= 1.0:
            z[m - 1] = trans.n
        elif trans.n == 0:
            z[m - 1] = 0
        else:
            z[m - 1] = rng.binomial(trans.n, upsilon(marg, m, last))
        aux = z
    return LengthPrefix(vals, aux)


def transition_sample_matrix(trans, marg, j, prev, rng):
    """Batch analog of transition_sample: one chain step for a state vector.

    Returns (v_next, aux) with aux matching the family's latent column
    (z counts, fresh flags, or None).  Absorbing lanes stay at 1.
    """
    prev = np.asarray(prev, dtype=float)
    n = prev.shape[0]
    alive = prev < 1.0
    a, b = marg.shape(j + 1)
    aux = None
    if isinstance(trans, Independent) or (isinstance(trans, BetaBinomial) and trans.n == 0):
        nxt = rng.beta(a, b, size=n)
        if isinstance(trans, BetaBinomial):
            aux = np.zeros(n, dtype=np.int64)
    elif isinstance(trans, CompletelyDependent):
        nxt = upsilon(marg, j, prev)
    elif isinstance(trans, BetaBinomial):
        z = rng.binomial(trans.n, upsilon(marg, j, prev))
        nxt = rng.beta(a + z, b + trans.n - z)
        aux = np.where(alive, z, trans.n)
    elif isinstance(trans, Lazy):
        rho = float(trans.rho)
        up = upsilon(marg, j, prev)
        if rho >= 1.0:
            nxt = up
            aux = np.zeros(n, dtype=np.bool_)
        elif rho <= 0.0:
            nxt = rng.beta(a, b, size=n)
            aux = alive.copy()
        else:
            fresh = rng.random(n) >= rho
            nxt = np.where(fresh, rng.beta(a, b, size=n), up)
            aux = fresh & alive
    else:
        raise TypeError("unknown transition family %r" % (trans,))
    return np.where(alive, nxt, 1.0), aux


def sample_prefix_matrix(model: MsbpModel, m: int, n: int, rng=None):
    """n independent trajectories of length m as an (n, m) array.

    Returns (values, aux) with aux as in LengthPrefix but shaped (n, m).
    Vectorized across trajectories; meant for Monte Carlo sweeps.
    """
    if m < 1 or n < 1:
        raise ValueError("need m >= 1 and n >= 1, got m=%r n=%r" % (m, n))
    rng = as_generator(rng, model.seed)
    marg, trans = model.marg, model.trans
    a1, b1 = marg.shape(1)
    vals = np.empty((n, m))
    vals[:, 0] = rng.beta(a1, b1, size=n)
    aux = None
    if isinstance(trans, BetaBinomial):
        aux = np.zeros((n, m), dtype=np.int64)
    elif isinstance(trans, Lazy):
        aux = np.zeros((n, m), dtype=np.bool_)
        aux[:, 0] = True
    for j in range(1, m):
        vals[:, j], col = transition_sample_matrix(trans, marg, j, vals[:, j - 1], rng)
        if aux is not None and col is not None:
            aux[:, j] = col
    if isinstance(trans, BetaBinomial):
        out = np.empty_like(aux)
        out[:, : m - 1] = aux[:, 1:]
        last = vals[:, m - 1]
        alive = last < 1.0
        if trans.n == 0:
            out[:, m - 1] = 0
        else:
            z_last = rng.binomial(trans.n, upsilon(marg, m, np.where(alive, last, 0.0)))
            out[:, m - 1] = np.where(alive, z_last, trans.n)
        aux = out
    return vals, aux


def marginal_check(model: MsbpModel, j: int, n_samples: int, rng=None) -> float:
    """KS distance between the sampled law of v_j and its target Beta.

    Uses the exact Beta CDF, so the only noise is the n_samples^{-1/2}
    sampling fluctuation of the empirical CDF.
    """
    if j < 1:
        raise ValueError("j must be >= 1, got %r" % (j,))
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100, got %r" % (n_samples,))
    vals, _ = sample_prefix_matrix(model, j, n_samples, rng)
    a, b = model.marg.shape(j)
    u = np.sort(reg_inc_beta(a, b, vals[:, j - 1]))
    grid = np.arange(1, n_samples + 1) / n_samples
    return float(max(np.max(grid - u), np.max(u - (grid - 1.0 / n_samples))))


def properness_diagnostic(model: MsbpModel, epsilon: float, max_m: int, rng=None):
    """Walk one trajectory until the leftover stick mass drops below epsilon.

    Returns (m_star, remaining_mass): m_star is the first length at which
    prod_{j<=m}(1 - v_j) < epsilon, or None if max_m steps were not enough
    (an improperness signal, not an error).  The product is accumulated in
    log space.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1), got %r" % (epsilon,))
    if max_m < 1:
        raise ValueError("max_m must be >= 1, got %r" % (max_m,))
    rng = as_generator(rng, model.seed)
    marg, trans = model.marg, model.trans
    log_eps = np.log(epsilon)
    a1, b1 = marg.shape(1)
    v = float(rng.beta(a1, b1))
    log_rem = 0.0
    for j in range(1, max_m + 1):
        if v >= 1.0:
            return j, 0.0
        log_rem += np.log1p(-v)
        if log_rem < log_eps:
            return j, float(np.exp(log_rem))
        v, _ = transition_sample(trans, marg, j, v, rng)
    return None, float(np.exp(log_rem))
