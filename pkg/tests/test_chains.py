import numpy as np
import pytest
from scipy import stats as sps

from msbp.chains import (
    BetaBinomial,
    CompletelyDependent,
    Independent,
    Lazy,
    LengthPrefix,
    MsbpModel,
    sample_prefix,
    sample_prefix_matrix,
    transition_sample,
)
from msbp.rng import substream
from msbp.specfun import ConstBeta, PitmanYor

from oracles import beta_cdf, ks_vs_cdf


def test_transition_params_validate():
    with pytest.raises(ValueError):
        BetaBinomial(-1)
    with pytest.raises(ValueError):
        Lazy(1.5)
    with pytest.raises(ValueError):
        Lazy(-0.1)
    BetaBinomial(0)
    Lazy(0.0)
    Lazy(1.0)


def test_marginal_preservation_deep_coordinate():
    # distribution of v_5 must still be the declared marginal
    cases = [
        (MsbpModel(PitmanYor(0.3, 2.0), BetaBinomial(5), seed=101), PitmanYor(0.3, 2.0)),
        (MsbpModel(ConstBeta(1.0, 3.0), Lazy(0.5), seed=102), ConstBeta(1.0, 3.0)),
        (MsbpModel(PitmanYor(0.2, 1.0), CompletelyDependent(), seed=103), PitmanYor(0.2, 1.0)),
    ]
    for model, marg in cases:
        v, _ = sample_prefix_matrix(model, 5, 10_000)
        a, b = marg.shape(5)
        ks = ks_vs_cdf(v[:, 4], beta_cdf(a, b))
        assert ks < 0.02, (model.trans, ks)


def test_limit_regimes_reduce_to_independent():
    marg = PitmanYor(0.3, 2.0)
    ind, _ = sample_prefix_matrix(MsbpModel(marg, Independent(), seed=7), 3, 10_000)
    bb0, _ = sample_prefix_matrix(MsbpModel(marg, BetaBinomial(0), seed=8), 3, 10_000)
    lz0, _ = sample_prefix_matrix(MsbpModel(marg, Lazy(0.0), seed=9), 3, 10_000)
    for j in (1, 2):
        assert sps.ks_2samp(ind[:, j], bb0[:, j]).pvalue > 0.01
        assert sps.ks_2samp(ind[:, j], lz0[:, j]).pvalue > 0.01


def test_lazy_one_equals_completely_dependent_bitwise():
    marg = PitmanYor(0.3, 1.0)
    a = sample_prefix(MsbpModel(marg, Lazy(1.0), seed=55), 12)
    b = sample_prefix(MsbpModel(marg, CompletelyDependent(), seed=55), 12)
    assert np.array_equal(a.values, b.values)


def test_dependence_orders_the_correlation():
    # corr(v_1, v_2) strictly increases with the coupling knob
    def corr_and_se(model, n):
        v, _ = sample_prefix_matrix(model, 2, n)
        r = float(np.corrcoef(v[:, 0], v[:, 1])[0, 1])
        return r, (1.0 - r * r) / np.sqrt(n)

    n = 100_000
    marg = ConstBeta(1.0, 2.0)
    rs = [corr_and_se(MsbpModel(marg, BetaBinomial(k), seed=200 + k), n)
          for k in (0, 5, 25, 100)]
    for (r1, s1), (r2, s2) in zip(rs, rs[1:]):
        assert r2 - r1 > 3.0 * float(np.hypot(s1, s2)), (r1, r2)

    rs = [corr_and_se(MsbpModel(marg, Lazy(rho), seed=300 + i), n)
          for i, rho in enumerate((0.0, 0.3, 0.7, 1.0))]
    for (r1, s1), (r2, s2) in zip(rs, rs[1:]):
        assert r2 - r1 > 3.0 * float(np.hypot(s1, s2)), (r1, r2)


def test_beta_binomial_conditional_law():
    # v2 | v1 ~ Be(a+z, b+N-z) with z ~ Bin(N, Upsilon(v1)); stationary flat
    # marginals make Upsilon the identity
    marg = ConstBeta(2.0, 2.0)
    rng = substream(77)
    v1 = 0.3
    pairs = [transition_sample(BetaBinomial(4), marg, 1, v1, rng) for _ in range(20_000)]
    vs = np.array([p[0] for p in pairs])
    zs = np.array([p[1] for p in pairs])
    freq = np.bincount(zs, minlength=5) / len(zs)
    want = sps.binom(4, v1).pmf(np.arange(5))
    assert np.max(np.abs(freq - want)) < 4 * np.max(np.sqrt(want * (1 - want) / len(zs)))
    ks = ks_vs_cdf(vs[zs == 2], beta_cdf(2.0 + 2, 2.0 + 2))
    assert ks < 0.02


def test_absorbing_endpoint():
    marg = ConstBeta(1.0, 1.0)
    rng = substream(5)
    for trans in (Independent(), CompletelyDependent(), BetaBinomial(3), Lazy(0.5)):
        v, aux = transition_sample(trans, marg, 1, 1.0, rng)
        assert v == 1.0


def test_prefix_aux_structure():
    model = MsbpModel(ConstBeta(1.0, 1.0), Lazy(0.6), seed=31)
    pre = sample_prefix(model, 20)
    assert isinstance(pre, LengthPrefix) and len(pre) == 20
    assert pre.aux.dtype == np.bool_ and pre.aux[0]
    bps = pre.breakpoints()
    assert bps[0] == 1
    copies = np.flatnonzero(~pre.aux)
    for i in copies:
        assert pre.values[i] == pre.values[i - 1]  # stationary copy is exact

    model_bb = MsbpModel(ConstBeta(1.0, 1.0), BetaBinomial(4), seed=32)
    pre_bb = sample_prefix(model_bb, 6)
    assert pre_bb.aux.dtype == np.int64
    assert np.all((pre_bb.aux >= 0) & (pre_bb.aux <= 4))
    pre_ind = sample_prefix(MsbpModel(ConstBeta(1.0, 1.0), Independent(), seed=33), 6)
    assert pre_ind.aux is None
    with pytest.raises(ValueError):
        pre_ind.breakpoints()


def test_matrix_sampler_agrees_with_scalar_path():
    model = MsbpModel(PitmanYor(0.2, 1.5), BetaBinomial(3), seed=88)
    v, aux = sample_prefix_matrix(model, 4, 50_000)
    assert v.shape == (50_000, 4) and aux.shape == (50_000, 4)
    rng = substream(88)
    scal = np.array([sample_prefix(model, 4, rng).values for _ in range(20_000)])
    for j in range(4):
        assert sps.ks_2samp(v[:, j], scal[:, j]).pvalue > 0.005, j


def test_seeded_model_stream_is_reproducible():
    model = MsbpModel(ConstBeta(1.0, 2.0), Independent(), seed=9)
    assert np.array_equal(sample_prefix(model, 5).values, sample_prefix(model, 5).values)
    v1, _ = sample_prefix_matrix(model, 3, 100)
    v2, _ = sample_prefix_matrix(model, 3, 100)
    assert np.array_equal(v1, v2)
