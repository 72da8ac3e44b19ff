"""Bayesian drift estimation for periodic diffusions with Gaussian series priors."""

__version__ = "0.1.0"

from .basis import BasisConvention, DriftSpec, eval_basis, eval_drift, make_test_drift, sobolev_norm
from .prior import (
    GpPriorSpec,
    HyperPriorSpec,
    alpha_density,
    rkhs_norm,
    sample_gp,
    sample_scale,
    sqrt_lambda,
)
from .sde import (
    OccupationDensity,
    PathRecord,
    empirical_l2_distance,
    invariant_density,
    periodic_local_time,
    scale_function,
    simulate_path,
)
from .inference import (
    HierPosterior,
    PosteriorGaussian,
    SuffStats,
    log_likelihood,
    posterior_alpha_mixture,
    posterior_ball_mass,
    posterior_fixed,
    posterior_scale_mixture,
    sufficient_stats,
)
from .theory import (
    RateTable,
    SmallBallEstimate,
    fit_rate_slope,
    normalizer_bounds_check,
    prior_mass_mc,
    rate_epsilon,
    rkhs_approximation,
    small_ball_mc,
)
