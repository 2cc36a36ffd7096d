"""Weighted Bhattacharyya affinities, weighted Chernoff information and
context-sensitive hypothesis testing."""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    NonIntegrableWeightError,
    OutsideSupportError,
    PreconditionError,
    RateInfiniteError,
    StateSpaceOverflowError,
    UnsupportedCombinationError,
    WChernoffError,
)
from .models import (
    Categorical,
    Cauchy,
    ConstWeight,
    Exponential,
    ExpTiltWeight,
    Gaussian,
    Poisson,
    TableWeight,
    TiltedDensity,
    log_density,
    model_from_json,
    model_to_json,
    rng_stream,
    sample,
    validate_combination,
    weight_from_json,
    weight_to_json,
    weight_value,
    weighted_normaliser,
)
from .affinity import (
    AffinityCurve,
    ChernoffResult,
    cauchy_bhattacharyya_half,
    cauchy_kl,
    chernoff,
    elliptic_k,
    log_mean,
    rho_w,
    weighted_bhattacharyya,
)
from .expfam import (
    ChernoffArc,
    ExpFamily1D,
    chernoff_arc_derivative,
    chernoff_efficiency,
    exponential_family,
    family_of_pair,
    gaussian_mean_family,
    poisson_family,
    verify_identities,
    weighted_bregman,
    weighted_kl,
)
from .testing import (
    BinaryTestProblem,
    LossEstimate,
    MAryProblem,
    SimReport,
    TiltedLikelihoodStats,
    bernoulli_kl,
    convergence_rows,
    cumulants,
    mary_exponent,
    mary_optimal_loss,
    optimal_loss_exact,
    optimal_loss_mc,
    rate_function,
    simulate,
    tail_bound,
    tail_frequency,
    tilted_llr,
    tilted_stats,
    weighted_tv,
)
