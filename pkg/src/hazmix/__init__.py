"""Posterior inference for survival data under an extended gamma hazard mixture.

The Gibbs sampler estimates posterior moments of the survival function on a
time grid; a Jacobi-polynomial expansion turns those moments into densities
from which intervals, medians, modes and the median survival time follow.
"""
from .data_io import RawDataset, builtin_leukemia, load_csv, simulate_weibull_mixture
from .gibbs import GibbsConfig, MomentEstimates, run_chain
from .inference import SurvivalSummary, kaplan_meier, median_survival_time, t_by_t_summaries
from .moments import SurvivalData, conditional_moment_closed, moment_table
from .polyapprox import WeightParams, build_basis, reconstruct
from .sampler import WeightedSample, hpd_interval, importance_sample, mode_estimate
from .special import ei

__all__ = [
    "RawDataset", "builtin_leukemia", "load_csv", "simulate_weibull_mixture",
    "GibbsConfig", "MomentEstimates", "run_chain",
    "SurvivalSummary", "kaplan_meier", "median_survival_time", "t_by_t_summaries",
    "SurvivalData", "conditional_moment_closed", "moment_table",
    "WeightParams", "build_basis", "reconstruct",
    "WeightedSample", "hpd_interval", "importance_sample", "mode_estimate",
    "ei",
]
