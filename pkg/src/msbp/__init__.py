"""Markov stick-breaking priors: simulation, moments, and posterior inference.

The package covers four dependence families for the length variables behind
a stick-breaking random measure (independent, completely dependent,
beta-binomial coupled, lazy copy-or-refresh), exact prior moments, Gibbs
updates for posterior work, an ordered-allocation mixture sampler, and a
command-line harness for reproducible experiments.
"""

from .chains import (
    BetaBinomial,
    CompletelyDependent,
    Independent,
    Lazy,
    LengthPrefix,
    MsbpModel,
    TransitionSpec,
    marginal_check,
    properness_diagnostic,
    sample_prefix,
    sample_prefix_matrix,
    transition_sample,
)
from .gibbs import (
    GibbsState,
    SiteConditional,
    bmsb_update_N,
    bmsb_update_v,
    bmsb_update_z,
    ensure_prefix,
    lmsb_site_conditional,
    lmsb_update_rho,
    lmsb_update_vj,
    lmsb_update_vstar_block,
    slice_sample_unit,
)
from .mixture import (
    DensityEstimate,
    GaussianMixtureTruth,
    MixtureDraw,
    MixtureSpec,
    OasState,
    binder_cluster_estimate,
    density_estimate,
    eight_gaussian_benchmark,
    fit,
    init_state,
    oas_sweep,
    posterior_Kn,
    tv_distance,
)
from .moments import (
    AllocationStats,
    TieSeries,
    allocation_logprob_given_v,
    mixed_moment_bmsb_stationary,
    mixed_moment_lmsb_stationary,
    tie_probability_series,
)
from .rng import as_generator, substream
from .specfun import (
    BetaOneTheta,
    ConstBeta,
    ExplicitList,
    MarginalSeq,
    PitmanYor,
    beta_logpdf,
    inv_reg_inc_beta,
    log_beta,
    log_rising_factorial,
    reg_inc_beta,
    transport,
    upsilon,
    upsilon_composed,
    upsilon_inv,
)
from .weights import (
    SizeBiasedDraw,
    TruncationError,
    WeightPrefix,
    eppf_mc,
    extend_until,
    functional_covariance,
    prob_decreasing_bmsb,
    prob_decreasing_lmsb,
    prob_decreasing_mc,
    sample_Kn,
    size_biased_sample,
    stick_break,
    tie_probability_mc,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # marginals and special functions
    "MarginalSeq", "PitmanYor", "ConstBeta", "BetaOneTheta", "ExplicitList",
    "reg_inc_beta", "inv_reg_inc_beta", "log_beta", "beta_logpdf",
    "log_rising_factorial", "transport", "upsilon", "upsilon_inv",
    "upsilon_composed",
    # length-variable chains
    "TransitionSpec", "Independent", "CompletelyDependent", "BetaBinomial",
    "Lazy", "MsbpModel", "LengthPrefix", "transition_sample", "sample_prefix",
    "sample_prefix_matrix", "marginal_check", "properness_diagnostic",
    # weights and partitions
    "WeightPrefix", "SizeBiasedDraw", "TruncationError", "stick_break",
    "extend_until", "size_biased_sample", "sample_Kn", "tie_probability_mc",
    "eppf_mc", "functional_covariance", "prob_decreasing_mc",
    "prob_decreasing_lmsb", "prob_decreasing_bmsb",
    # closed-form moments
    "AllocationStats", "TieSeries", "mixed_moment_bmsb_stationary",
    "mixed_moment_lmsb_stationary", "allocation_logprob_given_v",
    "tie_probability_series",
    # posterior updates
    "GibbsState", "SiteConditional", "bmsb_update_z", "bmsb_update_v",
    "bmsb_update_N", "lmsb_site_conditional", "lmsb_update_vj",
    "lmsb_update_vstar_block", "lmsb_update_rho", "ensure_prefix",
    "slice_sample_unit",
    # mixture sampler
    "MixtureSpec", "OasState", "MixtureDraw", "DensityEstimate",
    "GaussianMixtureTruth", "eight_gaussian_benchmark", "init_state",
    "oas_sweep", "fit", "density_estimate", "tv_distance", "posterior_Kn",
    "binder_cluster_estimate",
    # reproducibility
    "substream", "as_generator",
]
