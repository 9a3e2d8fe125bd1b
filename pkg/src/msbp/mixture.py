"""Ordered allocation Gibbs sampler for univariate Gaussian mixtures.

Observations are modelled as draws from a countable Gaussian mixture whose
weights follow a stick-breaking chain prior and whose (mean, precision)
atoms carry a Normal-Gamma base.  The sampler keeps the occupied components
in order of appearance: allocation moves reassign one observation at a time
against the current weights, with a marginal-likelihood term for opening a
new block, the block-to-stick map is refreshed index by index over the
unpicked stick positions, atoms are conjugate, and the length variables are
updated through the family-specific conditionals of the gibbs module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .chains import BetaBinomial, CompletelyDependent, Independent, Lazy, MsbpModel, sample_prefix
from .gibbs import (
    GibbsState,
    bmsb_update_N,
    bmsb_update_v,
    bmsb_update_z,
    ensure_prefix,
    lmsb_update_rho,
    lmsb_update_vj,
    lmsb_update_vstar_block,
)
from .moments import AllocationStats
from .rng import as_generator
from .weights import TruncationError

__all__ = [
    "MixtureSpec",
    "OasState",
    "MixtureDraw",
    "DensityEstimate",
    "GaussianMixtureTruth",
    "eight_gaussian_benchmark",
    "init_state",
    "oas_sweep",
    "fit",
    "density_estimate",
    "tv_distance",
    "posterior_Kn",
    "binder_cluster_estimate",
]

# relative mass below which the unexplored stick tail is dropped from the
# block-index categorical
RHO_RESIDUAL_RTOL = 1e-10
MAX_PREFIX = 10 ** 6


@dataclass(frozen=True)
class MixtureSpec:
    """Mixture model description: weights prior, Normal-Gamma base, data.

    The base puts precision ~ Ga(a0, b0) (rate b0) and mean | precision
    ~ N(mu0, 1/(lam0 * precision)).  ``hyper_prior`` optionally activates
    hyperparameter learning: a pmf vector over {0..N_max} for Beta-Binomial
    models, a (a, b) Beta-shape pair for lazy models, or the string
    "uniform" for the defaults Unif({0..200}) and Unif(0, 1).
    """

    model: MsbpModel
    mu0: float
    lam0: float
    a0: float
    b0: float
    data: np.ndarray
    hyper_prior: Optional[object] = None

    def __post_init__(self):
        for name in ("lam0", "a0", "b0"):
            if not getattr(self, name) > 0.0:
                raise ValueError("%s must be positive, got %r" % (name, getattr(self, name)))
        data = np.asarray(self.data, dtype=float).ravel()
        if data.size and not np.all(np.isfinite(data)):
            raise ValueError("data must be finite")
        object.__setattr__(self, "data", data)
        object.__setattr__(
            self, "hyper_prior", _resolve_hyper_prior(self.model, self.hyper_prior)
        )


def _resolve_hyper_prior(model, prior):
    if prior is None:
        return None
    trans = model.trans
    if isinstance(trans, (Independent, BetaBinomial)):
        if isinstance(prior, str) and prior == "uniform":
            return np.full(201, 1.0 / 201.0)
        pmf = np.asarray(prior, dtype=float)
        if pmf.ndim != 1 or np.any(pmf < 0.0) or not pmf.sum() > 0.0:
            raise ValueError("N prior must be a nonnegative pmf vector")
        return pmf / pmf.sum()
    if isinstance(trans, Lazy):
        if isinstance(prior, str) and prior == "uniform":
            return (1.0, 1.0)
        a, b = prior
        if not (float(a) > 0.0 and float(b) > 0.0):
            raise ValueError("rho prior needs positive Beta shapes")
        return (float(a), float(b))
    raise ValueError("this weights family carries no tunable hyperparameter")


@dataclass
class OasState:
    """Sampler state: allocations, block-to-stick map, atoms, length chain.

    ``d`` holds 1-based order-of-appearance labels, ``rho`` the distinct
    stick indices backing each block, ``means``/``precs`` the atoms in block
    order.  ``gibbs`` owns the stick prefix and the dependence
    hyperparameter.
    """

    d: np.ndarray
    rho: np.ndarray
    means: np.ndarray
    precs: np.ndarray
    gibbs: GibbsState

    def n_blocks(self) -> int:
        return len(self.rho)

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.d, minlength=self.n_blocks() + 1)[1:]

    def validate(self) -> None:
        """Raise if the ordered-partition bookkeeping is broken."""
        k = self.n_blocks()
        if len(self.means) != k or len(self.precs) != k:
            raise ValueError("atom arrays out of step with the block count")
        if len(set(int(r) for r in self.rho)) != k or (k and self.rho.min() < 1):
            raise ValueError("block-to-stick map must be distinct positive indices")
        if self.d.size:
            if int(self.d.max()) != k or int(self.d.min()) < 1:
                raise ValueError("labels must cover 1..%d" % k)
            mins = [int(np.flatnonzero(self.d == j + 1)[0]) for j in range(k)]
            if any(mins[j] > mins[j + 1] for j in range(k - 1)):
                raise ValueError("blocks are not in least-element order")
        elif k:
            raise ValueError("no data cannot carry blocks")
        if k and len(self.gibbs.prefix) < int(self.rho.max()):
            raise ValueError("stick prefix shorter than the largest picked index")


class MixtureDraw(NamedTuple):
    """One posterior snapshot: labels, block weights, remainder, atoms."""

    d: np.ndarray
    weights: np.ndarray
    remainder: float
    means: np.ndarray
    precs: np.ndarray


@dataclass(frozen=True)
class DensityEstimate:
    """A density tabulated on an increasing grid."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0.0):
            raise ValueError("grid must be increasing with at least two points")
        if values.shape != grid.shape:
            raise ValueError("values must match the grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def integral(self) -> float:
        """Trapezoid integral over the grid."""
        return float(np.sum((self.values[1:] + self.values[:-1]) * 0.5 * np.diff(self.grid)))


# --------------------------------------------------------------------------
# Normal-Gamma base measure
# --------------------------------------------------------------------------

def _ng_posterior(spec: MixtureSpec, ys: np.ndarray):
    k = len(ys)
    lam = spec.lam0 + k
    mean = (spec.lam0 * spec.mu0 + ys.sum()) / lam
    a = spec.a0 + 0.5 * k
    b = spec.b0
    if k:
        ybar = float(ys.mean())
        b = (
            spec.b0
            + 0.5 * float(((ys - ybar) ** 2).sum())
            + 0.5 * spec.lam0 * k * (ybar - spec.mu0) ** 2 / lam
        )
    return mean, lam, a, b


def _draw_atom(spec: MixtureSpec, ys: np.ndarray, rng):
    mean, lam, a, b = _ng_posterior(spec, ys)
    tau = float(rng.gamma(a, 1.0 / b))
    mu = float(rng.normal(mean, 1.0 / math.sqrt(lam * tau)))
    return mu, tau


def _norm_logpdf(y, mu, tau):
    return 0.5 * (np.log(tau) - math.log(2.0 * math.pi)) - 0.5 * tau * (y - mu) ** 2


def _predictive_logpdf(y, spec: MixtureSpec):
    """Log density of one future point with the atom integrated out."""
    nu = 2.0 * spec.a0
    scale2 = spec.b0 * (spec.lam0 + 1.0) / (spec.a0 * spec.lam0)
    z2 = (np.asarray(y, dtype=float) - spec.mu0) ** 2 / (nu * scale2)
    out = (
        math.lgamma(0.5 * (nu + 1.0))
        - math.lgamma(0.5 * nu)
        - 0.5 * math.log(nu * math.pi * scale2)
        - 0.5 * (nu + 1.0) * np.log1p(z2)
    )
    return out


# --------------------------------------------------------------------------
# state construction and bookkeeping
# --------------------------------------------------------------------------

def init_state(spec: MixtureSpec, rng=None, base_len: int = 8) -> OasState:
    """All data in one block, stick index 1, prior-drawn length chain."""
    rng = as_generator(rng, spec.model.seed, 7)
    marg = spec.model.marg
    trans = spec.model.trans
    prior = spec.hyper_prior
    if isinstance(trans, (Independent, BetaBinomial)):
        n0 = trans.n if isinstance(trans, BetaBinomial) else 0
        if prior is not None:
            n0 = int(rng.choice(len(prior), p=prior))
        pre = sample_prefix(MsbpModel(marg, BetaBinomial(n0)), base_len, rng)
        gibbs = GibbsState(marg, pre, AllocationStats(()), n0, prior)
    elif isinstance(trans, CompletelyDependent):
        pre = sample_prefix(MsbpModel(marg, Lazy(1.0)), base_len, rng)
        gibbs = GibbsState(marg, pre, AllocationStats(()), 1.0, None)
    elif isinstance(trans, Lazy):
        rho0 = float(rng.beta(*prior)) if prior is not None else trans.rho
        pre = sample_prefix(MsbpModel(marg, Lazy(rho0)), base_len, rng)
        gibbs = GibbsState(marg, pre, AllocationStats(()), rho0, prior)
    else:
        raise ValueError("unsupported transition family %r" % (trans,))
    n = len(spec.data)
    if n == 0:
        state = OasState(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
                         np.empty(0), np.empty(0), gibbs)
    else:
        mu, tau = _draw_atom(spec, spec.data, rng)
        state = OasState(
            np.ones(n, dtype=np.int64),
            np.array([1], dtype=np.int64),
            np.array([mu]),
            np.array([tau]),
            gibbs,
        )
    _sync_stats(state, base_len, rng)
    return state


def _stick_weights(gibbs: GibbsState):
    v = gibbs.prefix.values
    rem = np.cumprod(1.0 - v)
    w = v * np.concatenate([[1.0], rem[:-1]])
    return w, float(rem[-1])


def _sync_stats(state: OasState, base_len: int, rng) -> None:
    """Recompute occupancy counts from (d, rho) and resize the prefix."""
    sizes = state.block_sizes()
    if state.n_blocks():
        kappa = int(state.rho.max())
        a = np.zeros(kappa, dtype=np.int64)
        a[state.rho - 1] = sizes
        state.gibbs.stats = AllocationStats(a)
    else:
        state.gibbs.stats = AllocationStats(())
    ensure_prefix(state.gibbs, base_len, rng)


def _relabel(state: OasState) -> None:
    """Restore least-element block order; label 0 marks a detached point."""
    k = state.n_blocks()
    if k <= 1:
        return
    live = state.d[state.d > 0]
    labs, firsts = np.unique(live, return_index=True)  # labs is exactly 1..k
    order = np.argsort(firsts, kind="stable")
    if np.array_equal(order, np.arange(k)):
        return
    newlab = np.empty(k, dtype=np.int64)
    newlab[order] = np.arange(1, k + 1)
    mask = state.d > 0
    state.d[mask] = newlab[state.d[mask] - 1]
    state.rho = state.rho[order]
    state.means = state.means[order]
    state.precs = state.precs[order]


def _drop_block(state: OasState, lab: int) -> None:
    keep = np.arange(state.n_blocks()) != lab - 1
    state.rho = state.rho[keep]
    state.means = state.means[keep]
    state.precs = state.precs[keep]
    state.d = np.where(state.d > lab, state.d - 1, state.d)


def _draw_stick_index(state: OasState, picked, power: int, rng) -> int:
    """Categorical over unpicked stick indices with weight w_l^power.

    The prefix is extended until the unexplored tail is negligible relative
    to the enumerated mass, so the draw is exact up to a relative sliver of
    RHO_RESIDUAL_RTOL.
    """
    gibbs = state.gibbs
    while True:
        w, rem = _stick_weights(gibbs)
        m = len(w)
        free = np.array([l for l in range(1, m + 1) if l not in picked], dtype=np.int64)
        with np.errstate(divide="ignore"):
            lw = power * np.log(w[free - 1])
        top = float(np.max(lw)) if len(lw) else -math.inf
        ltail = power * math.log(rem) if rem > 0.0 else -math.inf
        if math.isfinite(top):
            lse = top + math.log(np.exp(lw - top).sum())
            done = ltail < math.log(RHO_RESIDUAL_RTOL) + np.logaddexp(lse, ltail)
        else:
            done = False
        if done:
            p = np.exp(lw - top)
            p /= p.sum()
            pick = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
            return int(free[min(pick, len(free) - 1)])
        if not math.isfinite(top) and rem <= 0.0:
            raise RuntimeError("no stick mass left on unpicked indices")
        if m >= MAX_PREFIX:
            raise TruncationError(
                "stick prefix exceeded %d indices while locating block mass" % MAX_PREFIX
            )
        ensure_prefix(gibbs, m + 8, rng)


# --------------------------------------------------------------------------
# the sweep
# --------------------------------------------------------------------------

def oas_sweep(state: OasState, spec: MixtureSpec, rng=None, base_len: int = 8) -> OasState:
    """One full Gibbs sweep over allocations, stick map, atoms and sticks."""
    rng = as_generator(rng)
    y = spec.data
    n = len(y)
    for i in range(n):
        old = int(state.d[i])
        if int((state.d == old).sum()) == 1:
            state.d[i] = 0
            _drop_block(state, old)
        else:
            state.d[i] = 0  # detached; another point may now head the block
        _relabel(state)
        k = state.n_blocks()
        w, _ = _stick_weights(state.gibbs)
        wt = w[state.rho - 1] if k else np.empty(0)
        logp = np.empty(k + 1)
        if k:
            with np.errstate(divide="ignore"):
                logp[:k] = np.log(wt) + _norm_logpdf(y[i], state.means, state.precs)
        remmass = max(1.0 - float(wt.sum()), 0.0)
        logp[k] = (
            math.log(remmass) + float(_predictive_logpdf(y[i], spec))
            if remmass > 0.0
            else -math.inf
        )
        top = logp.max()
        p = np.exp(logp - top)
        p /= p.sum()
        pick = min(int(np.searchsorted(np.cumsum(p), rng.random(), side="right")), k)
        if pick == k:
            mu, tau = _draw_atom(spec, y[i : i + 1], rng)
            state.d[i] = k + 1
            state.rho = np.append(
                state.rho, _draw_stick_index(state, set(map(int, state.rho)), 1, rng)
            )
            state.means = np.append(state.means, mu)
            state.precs = np.append(state.precs, tau)
        else:
            state.d[i] = pick + 1
        _relabel(state)
    # block-to-stick map
    sizes = state.block_sizes()
    for j in range(state.n_blocks()):
        picked = set(map(int, state.rho)) - {int(state.rho[j])}
        state.rho[j] = _draw_stick_index(state, picked, int(sizes[j]), rng)
    # atoms
    for j in range(state.n_blocks()):
        mu, tau = _draw_atom(spec, y[state.d == j + 1], rng)
        state.means[j] = mu
        state.precs[j] = tau
    # length variables
    _sync_stats(state, base_len, rng)
    gibbs = state.gibbs
    trans = spec.model.trans
    if isinstance(trans, (Independent, BetaBinomial)):
        bmsb_update_z(gibbs, rng)
        bmsb_update_v(gibbs, rng)
        if spec.hyper_prior is not None:
            bmsb_update_N(gibbs, rng)
    elif isinstance(trans, CompletelyDependent):
        lmsb_update_vstar_block(gibbs, rng)
    else:
        for j in range(1, len(gibbs.prefix) + 1):
            lmsb_update_vj(gibbs, j, rng)
        lmsb_update_vstar_block(gibbs, rng)
        if spec.hyper_prior is not None:
            lmsb_update_rho(gibbs, rng)
    return state


def fit(spec: MixtureSpec, iters: int = 5000, burnin: int = 1000, thin: int = 4, rng=None):
    """Run the sampler and return thinned post-burn-in snapshots."""
    if not iters > burnin >= 0:
        raise ValueError("need iters > burnin >= 0, got %r" % ((iters, burnin),))
    if thin < 1:
        raise ValueError("thin must be >= 1, got %r" % (thin,))
    rng = as_generator(rng, spec.model.seed, 11)
    state = init_state(spec, rng)
    draws = []
    for s in range(1, iters + 1):
        oas_sweep(state, spec, rng)
        if s > burnin and (s - burnin) % thin == 0:
            w, _ = _stick_weights(state.gibbs)
            wt = w[state.rho - 1] if state.n_blocks() else np.empty(0)
            draws.append(
                MixtureDraw(
                    state.d.copy(),
                    wt.copy(),
                    max(1.0 - float(wt.sum()), 0.0),
                    state.means.copy(),
                    state.precs.copy(),
                )
            )
    return draws


# --------------------------------------------------------------------------
# estimators on draws
# --------------------------------------------------------------------------

def density_estimate(draws: Sequence[MixtureDraw], spec: MixtureSpec, grid) -> DensityEstimate:
    """Posterior mean density: allocated blocks plus predictive remainder."""
    if not len(draws):
        raise ValueError("need at least one posterior draw")
    grid = np.asarray(grid, dtype=float)
    pred = np.exp(_predictive_logpdf(grid, spec))
    acc = np.zeros_like(grid)
    for dr in draws:
        mix = dr.remainder * pred
        for w, mu, tau in zip(dr.weights, dr.means, dr.precs):
            mix = mix + w * np.exp(_norm_logpdf(grid, mu, tau))
        acc += mix
    return DensityEstimate(grid, acc / len(draws))


def tv_distance(f: DensityEstimate, g: DensityEstimate) -> float:
    """Half the trapezoid integral of |f - g| over the shared grid."""
    if not np.array_equal(f.grid, g.grid):
        raise ValueError("density estimates live on different grids")
    diff = np.abs(f.values - g.values)
    return float(0.5 * np.sum((diff[1:] + diff[:-1]) * 0.5 * np.diff(f.grid)))


def posterior_Kn(draws: Sequence[MixtureDraw]) -> np.ndarray:
    """Empirical pmf of the number of occupied blocks; index = block count."""
    if not len(draws):
        raise ValueError("need at least one posterior draw")
    ks = [int(dr.d.max()) if dr.d.size else 0 for dr in draws]
    pmf = np.bincount(ks, minlength=max(ks) + 1).astype(float)
    return pmf / pmf.sum()


def binder_cluster_estimate(draws: Sequence[MixtureDraw]):
    """Visited partition minimizing the pairwise-loss estimate.

    The loss of a candidate counts discordant pairs against the posterior
    co-clustering frequencies; minimizing over visited partitions keeps the
    search tractable.
    """
    if not len(draws):
        raise ValueError("need at least one posterior draw")
    n = len(draws[0].d)
    if n == 0:
        return []
    coclust = np.zeros((n, n))
    for dr in draws:
        coclust += dr.d[:, None] == dr.d[None, :]
    coclust /= len(draws)
    iu = np.triu_indices(n, k=1)
    best, best_loss = None, math.inf
    seen = set()
    for dr in draws:
        key = dr.d.tobytes()
        if key in seen:
            continue
        seen.add(key)
        same = (dr.d[:, None] == dr.d[None, :])[iu]
        loss = float(np.where(same, 1.0 - coclust[iu], coclust[iu]).sum())
        if loss < best_loss:
            best, best_loss = dr.d, loss
    return [sorted((np.flatnonzero(best == j) + 1).tolist()) for j in range(1, int(best.max()) + 1)]


# --------------------------------------------------------------------------
# benchmark generator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianMixtureTruth:
    """A finite Gaussian mixture with known density, used as ground truth."""

    means: tuple
    sds: tuple
    weights: tuple

    def __post_init__(self):
        means = tuple(float(x) for x in self.means)
        sds = tuple(float(x) for x in self.sds)
        w = np.asarray(self.weights, dtype=float)
        if not (len(means) == len(sds) == len(w)) or len(means) == 0:
            raise ValueError("component lists must share a positive length")
        if np.any(w <= 0.0) or np.any(np.asarray(sds) <= 0.0):
            raise ValueError("weights and spreads must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sds", sds)
        object.__setattr__(self, "weights", tuple(w / w.sum()))

    def sample(self, n: int, rng=None) -> np.ndarray:
        rng = as_generator(rng)
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        return rng.normal(np.asarray(self.means)[comp], np.asarray(self.sds)[comp])

    def pdf(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for w, mu, sd in zip(self.weights, self.means, self.sds):
            out += w * np.exp(-0.5 * ((y - mu) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))
        return out


def eight_gaussian_benchmark() -> GaussianMixtureTruth:
    """The eight-component benchmark: geometric weights, mixed separations."""
    return GaussianMixtureTruth(
        means=(-13.1, -7.2, -5.5, -2.7, 2.2, 4.3, 8.9, 9.7),
        sds=(1.0, 0.5, 0.3, 1.3, 0.5, 0.5, 0.9, 0.4),
        weights=tuple(0.1 * 0.9 ** j for j in range(8)),
    )
