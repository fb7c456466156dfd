"""Simulation and adaptive wavelet estimation for bifurcating Markov chains.

The package simulates trait trees under pluggable offspring kernels
(growth-fragmentation and bifurcating autoregression), reconstructs the
invariant density, the pair and triplet transition densities and the
growth-fragmentation splitting rate by hard-thresholded wavelet
estimators, evaluates Bernstein-type tail bounds for empirical means over
the tree, and replicates the whole splitting-rate benchmark experiment.
"""

from .deviation import (
    GF_DEMO_PARAMS,
    DeviationReport,
    ErgodicityParams,
    KappaSet,
    TestFunction,
    indicator,
    sigma1n,
    sigma2n,
    sigma3n,
    tail_bound,
    validate_bounds,
    validity_bar,
)
from .estimators import (
    EstimatorConfig,
    RateSpec,
    estimate_b,
    estimate_fp,
    estimate_fq,
    estimate_nu,
    estimate_p,
    estimate_q,
    oracle_estimate,
    rate_exponent,
    resolution_level,
    splitting_grid,
    threshold_joint,
    threshold_marginal,
)
from .experiment import (
    DEFAULT_C,
    TRIAL_RATES,
    ErrorStats,
    TableConfig,
    TrialRate,
    rate_sweep,
    relative_error,
    run_table,
)
from .kernels import BarModel, GrowthFragModel, bar_from_specs, splitting_rate
from .simulate import (
    RootLaw,
    autocorrelation,
    generation_autocorr,
    simulate_tree,
    tagged_branch,
)
from .tree import TreeSample, load_csv, sizes
from .wavelet import (
    CoeffPyramid,
    DensityEstimate,
    WaveletSpec,
    bin_empirical,
    daubechies_filter,
    dwt_forward,
    dwt_inverse,
    evaluate_on_grid,
    hard_threshold,
    quadrature_mirror,
)

__version__ = "0.1.0"
