import math

import numpy as np
import pytest

from msbp.chains import BetaBinomial, Lazy, LengthPrefix, MsbpModel, sample_prefix_matrix
from msbp.moments import (
    AllocationStats,
    allocation_logprob_given_v,
    mixed_moment_bmsb_stationary,
    mixed_moment_lmsb_stationary,
    tie_probability_series,
)
from msbp.rng import substream
from msbp.specfun import ConstBeta
from msbp.weights import stick_break, tie_probability_mc

from oracles import TIE_GEOMETRIC, beta_moment


def test_allocation_stats_counts():
    s = AllocationStats.from_allocations([1, 1, 2, 3])
    assert s.a == (2, 1, 1)
    assert s.b == (2, 1, 0)
    assert s.kappa == 3 and s.n == 4
    assert AllocationStats.from_allocations([]).kappa == 0
    # trailing empty levels are kept when given explicitly
    assert AllocationStats((1, 0, 2, 0)).b == (2, 2, 0, 0)
    with pytest.raises(ValueError):
        AllocationStats((1, -1))
    with pytest.raises(ValueError):
        AllocationStats.from_allocations([0, 1])


def _mc_mixed_moment(model, stats, reps, rng):
    v, _ = sample_prefix_matrix(model, stats.kappa, reps, rng)
    prod = np.ones(reps)
    for j in range(stats.kappa):
        prod *= v[:, j] ** stats.a[j] * (1.0 - v[:, j]) ** stats.b[j]
    return prod.mean(), prod.std(ddof=1) / math.sqrt(reps)


def test_bmsb_moment_reduces_to_independent_product():
    stats = AllocationStats((2, 1, 1))
    for alpha, beta in [(1.0, 1.0), (2.0, 3.0), (0.7, 5.0)]:
        closed = mixed_moment_bmsb_stationary(alpha, beta, 0, stats)
        prod = 1.0
        for j in range(stats.kappa):
            prod *= beta_moment(alpha, beta, stats.a[j], stats.b[j])
        assert abs(closed - prod) < 1e-14
        # n=0 and rho=0 are the same independent chain
        lazy = mixed_moment_lmsb_stationary(alpha, beta, 0.0, stats)
        assert abs(closed - lazy) < 1e-14


def test_lmsb_moment_fully_coupled_limit():
    # rho=1 shares one beta draw across every level
    stats = AllocationStats((3, 0, 2))
    alpha, beta = 2.0, 3.0
    closed = mixed_moment_lmsb_stationary(alpha, beta, 1.0, stats)
    assert abs(closed - beta_moment(alpha, beta, sum(stats.a), sum(stats.b))) < 1e-14


def test_lmsb_moment_continuous_at_rho_endpoints():
    stats = AllocationStats((1, 2, 0, 1))
    for rho0, rho1 in [(0.0, 1e-9), (1.0, 1.0 - 1e-9)]:
        m0 = mixed_moment_lmsb_stationary(1.5, 2.5, rho0, stats)
        m1 = mixed_moment_lmsb_stationary(1.5, 2.5, rho1, stats)
        assert abs(m0 - m1) < 1e-6


def test_bmsb_moment_against_mc():
    stats = AllocationStats((2, 1, 1))
    for alpha, beta, n, seed in [(1.0, 2.0, 3, 60), (2.0, 2.0, 6, 61)]:
        closed = mixed_moment_bmsb_stationary(alpha, beta, n, stats)
        model = MsbpModel(ConstBeta(alpha, beta), BetaBinomial(n))
        est, se = _mc_mixed_moment(model, stats, 400_000, substream(seed))
        assert abs(closed - est) < 3 * se


def test_lmsb_moment_against_mc():
    stats = AllocationStats((1, 0, 2))
    closed = mixed_moment_lmsb_stationary(2.0, 3.0, 0.5, stats)
    model = MsbpModel(ConstBeta(2.0, 3.0), Lazy(0.5))
    est, se = _mc_mixed_moment(model, stats, 400_000, substream(62))
    assert abs(closed - est) < 3 * se


def test_bmsb_moment_against_quadrature():
    # two levels: integrate the binomial mixture of conditional betas exactly
    alpha, beta, n = 1.5, 2.5, 4
    stats = AllocationStats((2, 3))
    closed = mixed_moment_bmsb_stationary(alpha, beta, n, stats)

    from scipy.special import betaln, comb
    from scipy.stats import beta as beta_dist

    nodes, wts = np.polynomial.legendre.leggauss(120)
    x = 0.5 * (nodes + 1.0)
    wts = 0.5 * wts
    f1 = beta_dist.pdf(x, alpha, beta) * x ** stats.a[0] * (1.0 - x) ** stats.b[0]
    total = 0.0
    for z in range(n + 1):
        pz = comb(n, z) * x ** z * (1.0 - x) ** (n - z)
        inner = beta_moment(alpha + z, beta + n - z, stats.a[1], stats.b[1])
        total += float(np.sum(wts * f1 * pz) * inner)
    assert abs(closed - total) < 1e-6


def test_lmsb_enumeration_matches_recursion():
    # kappa above the enumeration window exercises the folded recursion;
    # padding a small stats vector with empty levels must not change it
    stats = AllocationStats((1, 2, 1))
    small = mixed_moment_lmsb_stationary(1.0, 2.0, 0.4, stats)
    padded = AllocationStats((1, 2, 1) + (0,) * 15)
    big = mixed_moment_lmsb_stationary(1.0, 2.0, 0.4, padded)
    assert abs(small - big) < 1e-12


def test_allocation_logprob_is_log_weight():
    pre = LengthPrefix(np.array([0.5, 0.5, 0.5]))
    stats = AllocationStats.from_allocations([3])
    assert abs(allocation_logprob_given_v(pre, stats) - 3 * math.log(0.5)) < 1e-15
    assert allocation_logprob_given_v(pre, AllocationStats(())) == 0.0
    # consistency with stick-breaking weights for a random configuration
    rng = substream(63)
    v = rng.random(6)
    d = [2, 2, 5, 1, 6]
    w = stick_break(LengthPrefix(v)).weights
    manual = sum(math.log(w[i - 1]) for i in d)
    got = allocation_logprob_given_v(LengthPrefix(v), AllocationStats.from_allocations(d))
    assert abs(got - manual) < 1e-12
    zero = LengthPrefix(np.array([0.0, 1.0]))
    assert allocation_logprob_given_v(zero, AllocationStats((1, 0))) == -math.inf
    # v = (0, 1) routes all mass to level 2, so that allocation is certain
    assert allocation_logprob_given_v(zero, AllocationStats((0, 1))) == 0.0
    saturated = LengthPrefix(np.array([1.0, 0.5]))
    assert allocation_logprob_given_v(saturated, AllocationStats((0, 1))) == -math.inf
    with pytest.raises(ValueError):
        allocation_logprob_given_v(pre, AllocationStats((1, 1, 1, 1)))


def test_tie_series_reduces_to_closed_forms():
    for theta in (1.0, 3.0):
        got = tie_probability_series("bmsb_stationary", 1.0, theta, n=0)
        assert got.converged and got.tail_bound < 1e-10
        assert abs(got.value - 1.0 / (1.0 + theta)) < 1e-9
        lazy = tie_probability_series("lmsb_stationary", 1.0, theta, rho=0.0)
        assert abs(lazy.value - 1.0 / (1.0 + theta)) < 1e-9


def test_tie_series_terms_are_mixed_moments():
    # increments of the partial sum are E[v_j^2 prod_{i<j} (1-v_i)^2]
    for j in range(2, 5):
        stats = AllocationStats((0,) * (j - 1) + (2,))
        sb = tie_probability_series("bmsb_stationary", 1.5, 2.0, n=3, truncation=j)
        sb_prev = tie_probability_series("bmsb_stationary", 1.5, 2.0, n=3, truncation=j - 1)
        mm = mixed_moment_bmsb_stationary(1.5, 2.0, 3, stats)
        assert abs((sb.value - sb_prev.value) - mm) < 1e-12
        sl = tie_probability_series("lmsb_stationary", 1.5, 2.0, rho=0.5, truncation=j)
        sl_prev = tie_probability_series("lmsb_stationary", 1.5, 2.0, rho=0.5, truncation=j - 1)
        ml = mixed_moment_lmsb_stationary(1.5, 2.0, 0.5, stats)
        assert abs((sl.value - sl_prev.value) - ml) < 1e-12


def test_tie_series_against_mc():
    got = tie_probability_series("bmsb_stationary", 1.0, 2.0, n=4)
    assert got.converged
    est, se = tie_probability_mc(MsbpModel(ConstBeta(1.0, 2.0), BetaBinomial(4)),
                                 100_000, substream(64))
    assert abs(got.value - est) < 3 * se
    got = tie_probability_series("lmsb_stationary", 1.0, 2.0, rho=0.5)
    assert got.converged
    est, se = tie_probability_mc(MsbpModel(ConstBeta(1.0, 2.0), Lazy(0.5)),
                                 100_000, substream(65))
    assert abs(got.value - est) < 3 * se


def test_tie_series_fully_coupled_does_not_certify():
    # at rho=1 the geometric tail bound degenerates; the partial sum is
    # still a valid lower bound on the true value 2 ln 2 - 1
    got = tie_probability_series("lmsb_stationary", 1.0, 1.0, rho=1.0, truncation=200)
    assert not got.converged
    assert math.isinf(got.tail_bound)
    assert got.value < TIE_GEOMETRIC < got.value + 0.05


def test_expected_weights_nearly_normalize():
    def e_weight_lazy(j, rho):
        stats = AllocationStats((0,) * (j - 1) + (1,))
        return mixed_moment_lmsb_stationary(1.0, 1.0, rho, stats)

    total = sum(e_weight_lazy(j, 0.5) for j in range(1, 41))
    assert 0.0 < 1.0 - total < 1e-3

    def e_weight_bb(j, n):
        stats = AllocationStats((0,) * (j - 1) + (1,))
        return mixed_moment_bmsb_stationary(1.0, 1.0, n, stats)

    total = sum(e_weight_bb(j, 5) for j in range(1, 9))
    assert 0.0 < 1.0 - total < 0.05


def test_moment_evaluator_input_guards():
    stats = AllocationStats((1, 1))
    with pytest.raises(ValueError):
        mixed_moment_bmsb_stationary(0.0, 1.0, 2, stats)
    with pytest.raises(ValueError):
        mixed_moment_bmsb_stationary(1.0, 1.0, 13, stats)
    with pytest.raises(ValueError):
        mixed_moment_bmsb_stationary(1.0, 1.0, 12, AllocationStats((1,) * 8))
    with pytest.raises(ValueError):
        mixed_moment_bmsb_stationary(1.0, 1.0, 2, AllocationStats((1,) * 9))
    with pytest.raises(ValueError):
        mixed_moment_lmsb_stationary(1.0, 1.0, 1.5, stats)
    with pytest.raises(ValueError):
        mixed_moment_lmsb_stationary(1.0, 1.0, 0.5, AllocationStats((1,) * 10_001))
    with pytest.raises(ValueError):
        tie_probability_series("bmsb_stationary", 1.0, 1.0)
    with pytest.raises(ValueError):
        tie_probability_series("lmsb_stationary", 1.0, 1.0)
    with pytest.raises(ValueError):
        tie_probability_series("lmsb_stationary", 1.0, 1.0, rho=0.5, truncation=0)
    with pytest.raises(ValueError):
        tie_probability_series("lmsb_stationary", 1.0, 1.0, rho=0.5, truncation=1001)
    with pytest.raises(ValueError):
        tie_probability_series("independent", 1.0, 1.0)
