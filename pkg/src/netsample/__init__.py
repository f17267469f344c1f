"""netsample: exact and Monte-Carlo variance analysis of network-driven sampling.

The package models chain-referral sampling as a tree-indexed Markov
process on a graph: a referral tree is filled by a random walk, one
kernel step per referral edge.  Given the walk kernel's spectrum and the
tree's pairwise-distance generating function, the variance of the sample
mean (and so the design effect against independent sampling) is an exact
finite sum; the simulators cross-check those formulas and cover the
without-replacement field protocol that the formulas idealize.
"""

from .errors import NetsampleError, NumericError, ParseError, ValidationError
from ._rng import derive_seed
from .graph_core import (
    Graph,
    NodeFeature,
    k_core,
    largest_connected_component,
    load_edge_list,
    load_node_feature,
    save_edge_list,
    save_node_feature,
)
from .sbm_gen import (
    BlockKernel,
    SbmSpec,
    block_transition,
    sample_sbm,
    two_block_params,
    two_block_spec,
)
from .markov_spectral import (
    Kernel,
    SpectralKernel,
    custom_kernel,
    inner_product_pi,
    rho_correlation,
    spectral_decompose,
    srw_kernel,
    transition_power_prob,
)
from .referral_tree import (
    BalanceDiagnostics,
    DistanceSpectrum,
    OffspringSpec,
    ReferralForest,
    ThresholdParams,
    bfs_prefix,
    distance_spectrum,
    g_eval,
    g_lower_bounds,
    gen_gw_tree,
    gen_m_tree,
    load_tree,
    save_tree,
    threshold_params,
    tree_stats,
)
from .estimators import (
    WalkSample,
    ht_estimator,
    pi_transform,
    sample_mean,
    vh_estimator,
)
from .variance_engine import (
    AutocorrEstimate,
    VarianceReport,
    autocorr_lambda_estimate,
    cov_pair,
    de_bounds,
    plug_in_variance_example1,
    sbm_plug_in_variance,
    variance_exact,
)
from .walk_sim import (
    SimConfig,
    count_repeats,
    mc_design_effect,
    repeat_rate_experiment,
    walk_with_replacement,
    walk_without_replacement,
)
from .cli_experiments import (
    ExperimentRecipe,
    load_recipe,
    run_fig2_threshold,
    run_fig3_blog_de,
    run_fig5_gcurves,
    run_recipe,
)

__version__ = "0.1.0"

__all__ = [
    "NetsampleError",
    "ValidationError",
    "ParseError",
    "NumericError",
    "derive_seed",
    "Graph",
    "NodeFeature",
    "load_edge_list",
    "save_edge_list",
    "load_node_feature",
    "save_node_feature",
    "k_core",
    "largest_connected_component",
    "SbmSpec",
    "BlockKernel",
    "sample_sbm",
    "block_transition",
    "two_block_params",
    "two_block_spec",
    "Kernel",
    "SpectralKernel",
    "srw_kernel",
    "custom_kernel",
    "spectral_decompose",
    "inner_product_pi",
    "transition_power_prob",
    "rho_correlation",
    "ReferralForest",
    "OffspringSpec",
    "DistanceSpectrum",
    "ThresholdParams",
    "BalanceDiagnostics",
    "load_tree",
    "save_tree",
    "gen_m_tree",
    "gen_gw_tree",
    "bfs_prefix",
    "distance_spectrum",
    "g_eval",
    "threshold_params",
    "tree_stats",
    "g_lower_bounds",
    "WalkSample",
    "sample_mean",
    "vh_estimator",
    "ht_estimator",
    "pi_transform",
    "VarianceReport",
    "AutocorrEstimate",
    "variance_exact",
    "cov_pair",
    "de_bounds",
    "autocorr_lambda_estimate",
    "plug_in_variance_example1",
    "sbm_plug_in_variance",
    "SimConfig",
    "walk_with_replacement",
    "walk_without_replacement",
    "count_repeats",
    "mc_design_effect",
    "repeat_rate_experiment",
    "ExperimentRecipe",
    "load_recipe",
    "run_recipe",
    "run_fig2_threshold",
    "run_fig3_blog_de",
    "run_fig5_gcurves",
    "__version__",
]
