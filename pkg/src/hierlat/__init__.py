"""Hierarchical sequences X_{n+1} = F(X_n) built from averaging functions.

Submodules
----------
combiner
    k-ary combining functions, built-ins and composition.
averaging
    Randomized checker for the averaging axioms.
rates
    The constants ``lambda`` and ``phi`` that govern variance decay and the
    rate of convergence to the normal.
dist
    Distribution containers and order-1 Wasserstein distances.
zerobias
    Exact zero-bias transform of discrete laws and its couplings.
engine
    Monte Carlo iteration of the recursion and rate fitting.
cli
    The ``hierlat`` command.
"""
__version__ = "0.1.0"

from .averaging import AveragingReport, check_averaging, check_homogeneity
from .combiner import (
    Combiner,
    CompositionSpec,
    compose,
    diamond,
    from_function,
    identity,
    lp_combiner,
    mean_combiner,
    min_combiner,
    projection_combiner,
)
from .dist import (
    DiscreteDist,
    EmpiricalDist,
    PiecewiseUniformDist,
    distance_to_normal_exact,
    normal_quantile,
    wasserstein_exact,
    wasserstein_paired,
    wasserstein_to_std_normal,
)
from .engine import (
    LevelStats,
    RateFit,
    SimConfig,
    UniformInterval,
    fit_rate,
    noise_floor,
    run,
    run_exact_tree,
    run_pooled,
)
from .kernels import BACKEND
from .rates import (
    RateReport,
    diamond_rates,
    estimate_limit_mean,
    lambda_from_alpha,
    phi_from_alpha,
    phi_sequence,
    rate_report,
    side_weighted_family,
    t_family,
)
from .zerobias import (
    ZeroBiasPair,
    check_normal_bound,
    couple_comonotone,
    verify_zero_bias_identity,
    y_star_coupling,
    zero_bias_exact,
)

__all__ = [
    "AveragingReport", "BACKEND", "Combiner", "CompositionSpec", "DiscreteDist",
    "EmpiricalDist", "LevelStats", "PiecewiseUniformDist", "RateFit", "RateReport",
    "SimConfig", "UniformInterval", "ZeroBiasPair", "check_averaging", "check_homogeneity",
    "check_normal_bound", "compose", "couple_comonotone", "diamond", "diamond_rates",
    "distance_to_normal_exact", "estimate_limit_mean", "fit_rate", "from_function",
    "identity", "lambda_from_alpha", "lp_combiner", "mean_combiner", "min_combiner",
    "noise_floor", "normal_quantile", "phi_from_alpha", "phi_sequence",
    "projection_combiner", "rate_report", "run", "run_exact_tree", "run_pooled",
    "side_weighted_family", "t_family", "verify_zero_bias_identity",
    "wasserstein_exact", "wasserstein_paired", "wasserstein_to_std_normal",
    "y_star_coupling", "zero_bias_exact",
]
