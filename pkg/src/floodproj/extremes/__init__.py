"""Peaks-over-threshold extremes with a time-varying Poisson-GPD model."""

from .ensemble import (
    EnsembleReturnLevels,
    MemberReturnLevel,
    ensemble_return_levels,
    member_seeds,
    posterior_return_levels,
    write_return_level_summary,
)
from .gpd import (
    PARAM_NAMES,
    GPDParams,
    PriorSpec,
    default_priors,
    log_likelihood,
    log_posterior,
    return_level,
)
from .mcmc import MCMCConfig, MCMCError, PosteriorSample, fit_mcmc, write_draws_csv
from .pot import ExceedanceSet, pot_threshold, select_exceedances

__all__ = [
    "PARAM_NAMES",
    "EnsembleReturnLevels",
    "ExceedanceSet",
    "GPDParams",
    "MCMCConfig",
    "MCMCError",
    "MemberReturnLevel",
    "PosteriorSample",
    "PriorSpec",
    "default_priors",
    "ensemble_return_levels",
    "fit_mcmc",
    "log_likelihood",
    "log_posterior",
    "member_seeds",
    "posterior_return_levels",
    "return_level",
    "pot_threshold",
    "select_exceedances",
    "write_draws_csv",
    "write_return_level_summary",
]
