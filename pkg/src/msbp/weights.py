"""Stick-breaking weights, size-biased picks, and partition statistics.

The stick-breaking transform turns length variables v into weights
w_1 = v_1, w_j = v_j * prod_{i<j}(1 - v_i).  Everything downstream -- ties,
the exchangeable partition probability function, the number of blocks K_n --
is a functional of the weights, estimated here by Monte Carlo over lazily
extended prefixes.  The leftover mass is always carried multiplicatively
(and in log space), never as 1 - sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .chains import (CompletelyDependent, Lazy, LengthPrefix, MsbpModel,
                     sample_prefix_matrix, transition_sample,
                     transition_sample_matrix)
from .rng import as_generator
from .specfun import inv_reg_inc_beta, reg_inc_beta, upsilon

DEFAULT_CAP = 10 ** 6
# treat remaining unpicked mass below this fraction of the normalizer as
# exhausted: the pick is clamped to the deepest reachable index
RESIDUAL_RTOL = 1e-10


class TruncationError(RuntimeError):
    """A prefix hit its extension cap before reaching the requested mass."""

    def __init__(self, mass: float, length: int):
        super().__init__(
            "prefix reached length %d with cumulative mass %.6g; "
            "the parameterization may be improper or nearly so" % (length, mass))
        self.mass = float(mass)
        self.length = int(length)


@dataclass
class WeightPrefix:
    """Weights of a finite prefix plus the exact leftover mass.

    ``remaining`` equals prod(1 - v_j) for the consumed prefix, maintained
    multiplicatively; ``log_remaining`` carries the same product in log space
    and stays informative after ``remaining`` underflows.
    """

    weights: np.ndarray
    remaining: float
    log_remaining: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.log_remaining is None:
            self.log_remaining = math.log(self.remaining) if self.remaining > 0.0 else -math.inf

    def __len__(self) -> int:
        return len(self.weights)

    def mass(self) -> float:
        return float(self.weights.sum())


@dataclass
class SizeBiasedDraw:
    """The first k indices of a size-biased permutation with their weights."""

    indices: list
    picked: np.ndarray
    prefix: WeightPrefix

    def __post_init__(self):
        self.picked = np.asarray(self.picked, dtype=float)
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("size-biased indices must be distinct, got %r" % (self.indices,))


def stick_break(prefix) -> WeightPrefix:
    """Map length variables to stick-breaking weights.

    Accepts a LengthPrefix or a bare array of values in [0, 1].
    """
    values = prefix.values if isinstance(prefix, LengthPrefix) else np.asarray(prefix, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise ValueError("need a nonempty 1-d prefix of length variables")
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ValueError("length variables must lie in [0, 1]")
    one_minus = 1.0 - values
    lead = np.concatenate([[1.0], np.cumprod(one_minus[:-1])])
    weights = values * lead
    remaining = float(lead[-1] * one_minus[-1])
    with np.errstate(divide="ignore"):
        log_remaining = float(np.sum(np.log1p(-values)))
    return WeightPrefix(weights, remaining, log_remaining)


def _is_geometric(model: MsbpModel) -> bool:
    # constant marginals + always-copy transitions give w_j = v (1-v)^{j-1}
    if not model.marg.is_constant():
        return False
    return isinstance(model.trans, CompletelyDependent) or (
        isinstance(model.trans, Lazy) and float(model.trans.rho) >= 1.0)


def _geom_pick_scalar(v: float, picked_sorted, t: float, norm: float, cap: int):
    """Size-biased pick over w_j = v (1-v)^j, skipping picked 0-based indices.

    Jumps between picked indices in closed form, so the cost is O(#picked)
    regardless of how deep the pick lands.
    """
    if v >= 1.0 or norm <= 1e-12:
        j = 0
        taken = {int(x) for x in picked_sorted}
        while j in taken:
            j += 1
        if v >= 1.0:
            return j, 1.0 if j == 0 else 0.0
        return j, v * math.exp(j * math.log1p(-v)) if v > 0.0 else 0.0
    lq = math.log1p(-v)
    cum = 0.0
    seg = 0
    for b in [int(x) for x in picked_sorted] + [-1]:
        start_rem = math.exp(seg * lq)  # (1-v)^seg, the tail mass at seg
        seg_mass = start_rem if b < 0 else start_rem - math.exp(b * lq)
        if b < 0 or cum + seg_mass >= t:
            tau = max(t - cum, 0.0)
            if start_rem <= 0.0:
                return seg, 0.0
            frac = min(tau / start_rem, 1.0 - 1e-12)  # clamp unreachable sliver
            d = max(int(math.ceil(math.log1p(-frac) / lq)), 1)
            j = seg + d - 1
            if 0 <= b <= j:
                j = b - 1  # float slack at the segment edge
            if j >= cap:
                raise TruncationError(-math.expm1(cap * lq), cap)
            return j, v * math.exp(j * lq)
        cum += seg_mass
        seg = b + 1
    raise AssertionError("unreachable")


def extend_until(model: MsbpModel, u: float, rng=None, cap: int = DEFAULT_CAP) -> WeightPrefix:
    """Shortest prefix whose cumulative weight exceeds u.

    Equivalently: extend until the leftover mass drops below 1 - u.  Raises
    TruncationError when cap indices were not enough, reporting the mass
    actually reached.
    """
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie in (0, 1), got %r" % (u,))
    if cap < 1:
        raise ValueError("cap must be >= 1, got %r" % (cap,))
    rng = as_generator(rng, model.seed)
    marg, trans = model.marg, model.trans
    a1, b1 = marg.shape(1)
    v = float(rng.beta(a1, b1))
    log_target = math.log1p(-u)
    if _is_geometric(model) and 0.0 < v < 1.0:
        # leftover after m sticks is (1-v)^m: jump straight to the answer
        m = int(math.ceil(log_target / math.log1p(-v)))
        m = max(m, 1)
        if math.fmod(log_target, math.log1p(-v)) == 0.0:
            m += 1  # strict inequality required
        if m > cap:
            raise TruncationError(-math.expm1(cap * math.log1p(-v)), cap)
        j = np.arange(m)
        return WeightPrefix(v * np.exp(j * math.log1p(-v)),
                            math.exp(m * math.log1p(-v)), m * math.log1p(-v))
    vals = [v]
    log_rem = math.log1p(-v) if v < 1.0 else -math.inf
    while log_rem >= log_target:
        if len(vals) >= cap:
            raise TruncationError(-math.expm1(log_rem), len(vals))
        v, _ = transition_sample(trans, marg, len(vals), v, rng)
        vals.append(v)
        log_rem += math.log1p(-v) if v < 1.0 else -math.inf
    return stick_break(np.asarray(vals))


class _Walker:
    """One lazily extended trajectory supporting sequential size-biased picks."""

    def __init__(self, model: MsbpModel, rng, cap: int):
        self.model = model
        self.rng = rng
        self.cap = cap
        a1, b1 = model.marg.shape(1)
        v = float(rng.beta(a1, b1))
        self.vals = [v]
        self.w = [v]
        self.log_rem = math.log1p(-v) if v < 1.0 else -math.inf
        self.picked: set = set()
        self.picked_mass = 0.0

    def extend_one(self) -> None:
        if len(self.vals) >= self.cap:
            raise TruncationError(-math.expm1(self.log_rem), len(self.vals))
        v, _ = transition_sample(self.model.trans, self.model.marg,
                                 len(self.vals), self.vals[-1], self.rng)
        self.vals.append(v)
        self.w.append(math.exp(self.log_rem) * v)
        self.log_rem += math.log1p(-v) if v < 1.0 else -math.inf

    def pick(self) -> tuple:
        """Draw the next size-biased index; returns (1-based index, weight)."""
        norm = 1.0 - self.picked_mass
        if norm <= 1e-12:
            # deterministic fallback: smallest unpicked index
            j = 1
            while j in self.picked:
                j += 1
            while len(self.w) < j:
                self.extend_one()
            wj = self.w[j - 1]
        else:
            t = self.rng.random() * norm
            while True:
                stored = -math.expm1(self.log_rem) - self.picked_mass
                if stored >= t:
                    break
                if math.exp(self.log_rem) < RESIDUAL_RTOL * norm:
                    t = stored  # unreachable sliver; clamp to the deepest index
                    break
                self.extend_one()
            cum = 0.0
            j = 0
            for idx, wj in enumerate(self.w, start=1):
                if idx in self.picked:
                    continue
                cum += wj
                if cum >= t:
                    j = idx
                    break
            if j == 0:  # float slack at the boundary: take deepest unpicked
                j = max(idx for idx in range(1, len(self.w) + 1) if idx not in self.picked)
                wj = self.w[j - 1]
        self.picked.add(j)
        self.picked_mass += wj
        return j, wj

    def as_prefix(self) -> WeightPrefix:
        return WeightPrefix(np.asarray(self.w), math.exp(self.log_rem), self.log_rem)


def size_biased_sample(model: MsbpModel, k: int, rng=None, cap: int = DEFAULT_CAP) -> SizeBiasedDraw:
    """First k picks of a size-biased permutation of the weights.

    Each pick is proportional to the weights over unpicked indices; once the
    picked mass reaches 1 the next index is the smallest unpicked one.
    """
    if k < 1:
        raise ValueError("k must be >= 1, got %r" % (k,))
    rng = as_generator(rng, model.seed)
    walker = _Walker(model, rng, cap)
    indices, picked = [], []
    for _ in range(k):
        j, wj = walker.pick()
        indices.append(j)
        picked.append(wj)
    return SizeBiasedDraw(indices, np.asarray(picked), walker.as_prefix())


def sample_Kn(model: MsbpModel, n: int, rng=None, cap: int = DEFAULT_CAP) -> int:
    """One draw of the number of blocks in a partition of n items.

    Runs the geometric-gap construction: G_1 = 1 and, given the first i-1
    size-biased weights with total mass S, the wait for the next new block is
    geometric with success probability 1 - S.
    """
    if n < 1:
        raise ValueError("n must be >= 1, got %r" % (n,))
    rng = as_generator(rng, model.seed)
    walker = _Walker(model, rng, cap)
    walker.pick()
    k, total = 1, 1
    while total < n:
        s = walker.picked_mass
        if s <= 0.0:
            gap = 1
        elif s >= 1.0:
            break  # no further blocks can appear
        else:
            gap = int(math.ceil(math.log(rng.random()) / math.log(s)))
        total += gap
        if total > n:
            break
        walker.pick()
        k += 1
    return k


class _SizeBiasedBatch:
    """Vectorized size-biased picking across many independent replicates.

    Trajectories extend level-synchronously in a shared weight matrix.  The
    few replicates whose targets sit very deep in the tail get peeled off to
    per-lane ragged storage so the shared matrix stays rectangular and small.
    The geometric special case (constant marginals with always-copy
    transitions) is routed through closed-form jumps instead because its
    prefix depth is unbounded in practice.
    """

    MAX_ELEMS = 125_000_000  # shared-matrix budget, ~1 GB of float64

    def __init__(self, model: MsbpModel, reps: int, rng, cap: int = DEFAULT_CAP):
        self.model = model
        self.reps = reps
        self.rng = rng
        self.cap = cap
        self.geom = _is_geometric(model)
        a1, b1 = model.marg.shape(1)
        v = rng.beta(a1, b1, size=reps)
        self.picked_mass = np.zeros(reps)
        self.picked_idx: list = []   # one (reps,) int array per pick
        self.picked_w: list = []
        if self.geom:
            self.v1 = v
            return
        self.W = np.zeros((reps, 32))
        self.W[:, 0] = v
        self.v_last = v
        with np.errstate(divide="ignore"):
            self.log_rem = np.log1p(-v)
        self.m = 1
        self.peeled = np.zeros(reps, dtype=bool)
        self.tails: dict = {}        # lane -> list of weights past tail_start
        self.tail_start: dict = {}   # lane -> absolute index of tails[lane][0]

    def _peel_limit(self) -> int:
        return max(32, self.reps >> 10)

    def _peel(self, lanes) -> None:
        for r in lanes:
            r = int(r)
            self.peeled[r] = True
            self.tail_start[r] = self.m
            self.tails[r] = []

    def _extend_one(self) -> None:
        if self.m >= self.cap:
            worst = int(np.argmax(np.where(self.peeled, -np.inf, self.log_rem)))
            raise TruncationError(-math.expm1(self.log_rem[worst]), self.m)
        if self.m == self.W.shape[1]:
            self.W = np.hstack([self.W, np.zeros_like(self.W)])
        if self.peeled.any():
            bulk = ~self.peeled
            nxt, _ = transition_sample_matrix(self.model.trans, self.model.marg,
                                              self.m, self.v_last[bulk], self.rng)
            self.W[bulk, self.m] = np.exp(self.log_rem[bulk]) * nxt
            with np.errstate(divide="ignore"):
                self.log_rem[bulk] += np.log1p(-nxt)
            self.v_last[bulk] = nxt
        else:
            nxt, _ = transition_sample_matrix(self.model.trans, self.model.marg,
                                              self.m, self.v_last, self.rng)
            self.W[:, self.m] = np.exp(self.log_rem) * nxt
            with np.errstate(divide="ignore"):
                self.log_rem += np.log1p(-nxt)
            self.v_last = nxt
        self.m += 1

    def _lane_weight(self, r: int, j: int) -> float:
        start = self.tail_start[r]
        if j < start:
            return float(self.W[r, j])
        tail = self.tails[r]
        while j - start >= len(tail):
            self._tail_step(r)
        return float(tail[j - start])

    def _tail_step(self, r: int) -> float:
        n_abs = self.tail_start[r] + len(self.tails[r])
        if n_abs >= self.cap:
            raise TruncationError(-math.expm1(self.log_rem[r]), n_abs)
        rem = math.exp(self.log_rem[r])
        v, _ = transition_sample(self.model.trans, self.model.marg, n_abs,
                                 float(self.v_last[r]), self.rng)
        wj = rem * v
        self.tails[r].append(wj)
        self.v_last[r] = v
        self.log_rem[r] = self.log_rem[r] + math.log1p(-v)
        return wj

    def _pick_lane_scalar(self, r: int, t_r: float, norm_r: float) -> tuple:
        """Walk one peeled lane: shared row, then its ragged tail."""
        picked = {int(arr[r]) for arr in self.picked_idx}
        if norm_r <= 1e-12:
            j = 0
            while j in picked:
                j += 1
            return j, self._lane_weight(r, j)
        start = self.tail_start[r]
        cum = 0.0
        best = -1
        for j in range(start):
            if j in picked:
                continue
            wj = float(self.W[r, j])
            if wj > 0.0:
                best = j
            cum += wj
            if cum >= t_r:
                return j, wj
        for i, wj in enumerate(self.tails[r]):
            j = start + i
            if j in picked:
                continue
            if wj > 0.0:
                best = j
            cum += wj
            if cum >= t_r:
                return j, wj
        while True:
            if math.exp(self.log_rem[r]) < RESIDUAL_RTOL * norm_r:
                if best >= 0:
                    return best, self._lane_weight(r, best)
                j = self.tail_start[r] + len(self.tails[r])
                return j, self._tail_step(r)  # nothing positive left; take next
            j = self.tail_start[r] + len(self.tails[r])
            wj = self._tail_step(r)
            if wj > 0.0:
                best = j
            cum += wj
            if cum >= t_r:
                return j, wj

    def _pick_general(self) -> tuple:
        reps = self.reps
        rows = np.arange(reps)
        u = self.rng.random(reps)
        u = np.where(u <= 0.0, 0.5, u)
        norm = 1.0 - self.picked_mass
        t = u * norm
        # extend until every lane's stored unpicked mass covers its target;
        # lanes whose leftover is a negligible sliver get clamped instead,
        # and stragglers with very deep targets are peeled off the matrix
        while True:
            stored = -np.expm1(self.log_rem) - self.picked_mass
            short = (t > stored) & (norm > 1e-12) & ~self.peeled
            if not short.any():
                break
            sliver = short & (np.exp(self.log_rem) < RESIDUAL_RTOL * norm)
            if sliver.any():
                t[sliver] = stored[sliver]
                short &= ~sliver
                if not short.any():
                    break
            n_short = int(short.sum())
            would_grow = self.m == self.W.shape[1]
            over_budget = would_grow and self.W.size * 2 > self.MAX_ELEMS
            if n_short <= self._peel_limit() or over_budget:
                self._peel(np.flatnonzero(short))
                break
            self._extend_one()
        taken = np.zeros((reps, self.m), dtype=bool)
        for prev in self.picked_idx:
            inside = prev < self.m
            taken[rows[inside], prev[inside]] = True
        WW = np.where(taken, 0.0, self.W[:, : self.m])
        t_eff = np.where(self.peeled, 0.0, t)
        C = np.cumsum(WW, axis=1)
        # strict count never lands on a zeroed column except when the target
        # was clamped past the last crossing, handled below
        idx = np.minimum((C < t_eff[:, None]).sum(axis=1), self.m - 1)
        odd = ((C[:, -1] < t_eff) | (norm <= 1e-12) | taken[rows, idx]) & ~self.peeled
        for r in np.flatnonzero(odd):
            free = np.flatnonzero(~taken[r])
            if free.size == 0:
                self._extend_one()
                taken = np.pad(taken, ((0, 0), (0, self.m - taken.shape[1])))
                free = np.array([self.m - 1])
            if norm[r] <= 1e-12:
                idx[r] = free[0]  # deterministic fallback: smallest unpicked
            else:
                pos = free[self.W[r, free] > 0.0]
                idx[r] = (pos[-1] if pos.size else free[-1])  # deepest reachable
        w = self.W[rows, np.minimum(idx, self.m - 1)]
        for r in np.flatnonzero(self.peeled):
            jr, wr = self._pick_lane_scalar(int(r), float(t[r]), float(norm[r]))
            idx[r] = jr
            w[r] = wr
        return idx, w

    def _pick_geom(self) -> tuple:
        reps = self.reps
        v = self.v1
        u = self.rng.random(reps)
        u = np.where(u <= 0.0, 0.5, u)
        norm = 1.0 - self.picked_mass
        t = u * norm
        if not self.picked_idx:
            # closed-form first pick: smallest 1-based j with 1-(1-v)^j >= t
            with np.errstate(divide="ignore", invalid="ignore"):
                lq = np.log1p(-v)
                j = np.ceil(np.log1p(-t) / lq).astype(np.int64)
            j = np.where(v >= 1.0, 1, np.clip(j, 1, None))
            over = (j > self.cap) | (v <= 0.0)
            if np.any(over):
                r = int(np.argmax(over))
                raise TruncationError(-math.expm1(self.cap * float(lq[r])) if v[r] > 0.0 else 0.0,
                                      self.cap)
            idx = j - 1
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.exp(np.log(v) + idx * lq)
            w = np.where(v >= 1.0, np.where(idx == 0, 1.0, 0.0), w)
            return idx, w
        # later picks jump segment by segment between already-picked indices
        picked_per_lane = np.sort(np.stack(self.picked_idx, axis=1), axis=1)
        idx = np.empty(reps, dtype=np.int64)
        w = np.empty(reps)
        for r in range(reps):
            idx[r], w[r] = _geom_pick_scalar(float(v[r]), picked_per_lane[r],
                                             float(t[r]), float(norm[r]), self.cap)
        return idx, w

    def pick(self) -> tuple:
        """One more size-biased pick for every replicate: (0-based idx, w)."""
        idx, w = self._pick_geom() if self.geom else self._pick_general()
        self.picked_idx.append(idx)
        self.picked_w.append(w)
        self.picked_mass = self.picked_mass + w
        return idx, w


def tie_probability_mc(model: MsbpModel, reps: int, rng=None, cap: int = DEFAULT_CAP):
    """Estimate P[two draws share an atom] as the mean first size-biased weight.

    Returns (estimate, stderr).
    """
    if reps < 100:
        raise ValueError("reps must be >= 100, got %r" % (reps,))
    rng = as_generator(rng, model.seed)
    batch = _SizeBiasedBatch(model, reps, rng, cap)
    _, w = batch.pick()
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(reps))


def eppf_mc(model: MsbpModel, composition, reps: int, rng=None, cap: int = DEFAULT_CAP):
    """Monte Carlo estimate of the partition probability for one composition.

    composition lists the block sizes (n_1..n_k) in order of appearance.  One
    size-biased draw of length k serves all factors of the integrand
    prod_j wtilde_j^(n_j - 1) * prod_{j<k} (1 - wtilde_1 - .. - wtilde_j).
    Returns (estimate, stderr).
    """
    comp = [int(c) for c in composition]
    if len(comp) < 1 or any(c < 1 for c in comp):
        raise ValueError("composition must be nonempty positive counts, got %r" % (composition,))
    if reps < 100:
        raise ValueError("reps must be >= 100, got %r" % (reps,))
    k = len(comp)
    if k == 1 and comp[0] == 1:
        return 1.0, 0.0  # empty products: the estimator is constant
    rng = as_generator(rng, model.seed)
    batch = _SizeBiasedBatch(model, reps, rng, cap)
    vals = np.ones(reps)
    cum = np.zeros(reps)
    for j, nj in enumerate(comp):
        _, w = batch.pick()
        if nj > 1:
            vals *= w ** (nj - 1)
        cum += w
        if j < k - 1:
            vals *= np.maximum(1.0 - cum, 0.0)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps))


def functional_covariance(tau_p: float, p0_A: float, p0_B: float, p0_AB: float) -> float:
    """Covariance of the random measure on two sets given the tie probability.

    Cov(P(A), P(B)) = tau_p * (P0(A intersect B) - P0(A) P0(B)).  With A = B
    this is the variance tau_p * p (1 - p).
    """
    for name, val in (("tau_p", tau_p), ("p0_A", p0_A), ("p0_B", p0_B), ("p0_AB", p0_AB)):
        if not 0.0 <= val <= 1.0:
            raise ValueError("%s must lie in [0, 1], got %r" % (name, val))
    if p0_AB > min(p0_A, p0_B) + 1e-12:
        raise ValueError("P0(A & B) = %g exceeds min(P0(A), P0(B)) = %g"
                         % (p0_AB, min(p0_A, p0_B)))
    if p0_AB < p0_A + p0_B - 1.0 - 1e-12:
        raise ValueError("P0(A & B) = %g below the Frechet lower bound %g"
                         % (p0_AB, p0_A + p0_B - 1.0))
    return tau_p * (p0_AB - p0_A * p0_B)


def prob_decreasing_mc(model: MsbpModel, j: int, reps: int, rng=None):
    """MC estimate of P[w_{j+1} <= w_j]; returns (estimate, stderr).

    Only the pair (v_j, v_{j+1}) matters: the shared leading product cancels,
    leaving P[v_{j+1} (1 - v_j) <= v_j].
    """
    if j < 1:
        raise ValueError("j must be >= 1, got %r" % (j,))
    if reps < 100:
        raise ValueError("reps must be >= 100, got %r" % (reps,))
    vals, _ = sample_prefix_matrix(model, j + 1, reps, rng)
    vj, vn = vals[:, j - 1], vals[:, j]
    hit = vn * (1.0 - vj) <= vj
    est = float(hit.mean())
    return est, float(math.sqrt(max(est * (1.0 - est), 1e-300) / reps))


@lru_cache(maxsize=8)
def _unit_gauss_nodes(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def _quantile_nodes(marg, j: int, nodes: int):
    # integrate E[g(v_j)] as int_0^1 g(F_j^{-1}(u)) du on Gauss-Legendre nodes
    u, qw = _unit_gauss_nodes(nodes)
    a, b = marg.shape(j)
    return inv_reg_inc_beta(a, b, u), qw


def _crossing_cdf(v: np.ndarray, a2: float, b2: float) -> np.ndarray:
    # P[v' (1-v) <= v] for independent v' ~ Be(a2, b2): the Beta CDF at
    # c(v) = min(1, v/(1-v))
    c = np.where(v >= 0.5, 1.0, v / np.maximum(1.0 - v, 1e-300))
    return reg_inc_beta(a2, b2, np.minimum(c, 1.0))


def prob_decreasing_lmsb(marg, rho: float, j: int, nodes: int = 256) -> float:
    """Closed form of P[w_{j+1} <= w_j] for the lazy chain.

    A copy always decreases the weight; a fresh draw decreases it with
    probability E[F_{j+1}(c(v_j))], evaluated by quadrature in the quantile
    domain.
    """
    if not 0.0 <= float(rho) <= 1.0:
        raise ValueError("rho must lie in [0, 1], got %r" % (rho,))
    if j < 1:
        raise ValueError("j must be >= 1, got %r" % (j,))
    v, qw = _quantile_nodes(marg, j, nodes)
    a2, b2 = marg.shape(j + 1)
    fresh = float(np.sum(qw * _crossing_cdf(v, a2, b2)))
    return float(rho) + (1.0 - float(rho)) * fresh


def prob_decreasing_bmsb(n: int, marg, j: int, nodes: int = 256) -> float:
    """Closed form of P[w_{j+1} <= w_j] for the Beta-Binomial chain.

    Conditions on the latent count: sum over z of
    E[ C(n,z) Y^z (1-Y)^(n-z) F_{a+z,b+n-z}(c(v_j)) ] with Y = Upsilon_j(v_j).
    """
    if n < 0:
        raise ValueError("n must be >= 0, got %r" % (n,))
    if j < 1:
        raise ValueError("j must be >= 1, got %r" % (j,))
    v, qw = _quantile_nodes(marg, j, nodes)
    a2, b2 = marg.shape(j + 1)
    y = upsilon(marg, j, v)
    c = np.minimum(np.where(v >= 0.5, 1.0, v / np.maximum(1.0 - v, 1e-300)), 1.0)
    total = 0.0
    for z in range(n + 1):
        pz = math.comb(n, z) * y ** z * (1.0 - y) ** (n - z)
        total += float(np.sum(qw * pz * reg_inc_beta(a2 + z, b2 + n - z, c)))
    return total
