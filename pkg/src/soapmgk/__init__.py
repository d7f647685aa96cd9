"""Scheduling-policy analysis and M/G/k simulation toolkit.

Rank functions for age-based policies (fb, serpt, gittins, and their
monotone envelopes), exact single-server mean response-time formulas, the
k-server response-time bound, heavy-traffic scale predictors, and an
event-driven multiserver simulator to check it all against.
"""

from .distributions import (
    BoundedPareto,
    Exponential,
    Hyperexponential,
    Pareto,
    PointMassMixture,
    SizeDistribution,
    TruncatedMoments,
    Uniform,
    Weibull,
)
from .mg1 import (
    KeyQuantities,
    LoadProfile,
    Mg1Metrics,
    MgkBound,
    heavy_traffic_scale,
    key_quantities,
    lam_for_rho,
    load_profile,
    mg1_metrics,
    mg1_metrics_alt,
    mgk_bound,
)
from .rank import (
    AgeCutoffs,
    RankFunction,
    age_cutoffs,
    build_rank_function,
    cutoff_growth_diagnostic,
    eta,
    gittins_rank,
    monotone_envelope,
    peak_age,
    serpt_rank,
)
from .sim import CoupledTrace, JobRecord, SimConfig, SimReport, next_crossing_time, run, run_coupled

__version__ = "0.1.0"

__all__ = [
    "SizeDistribution",
    "TruncatedMoments",
    "Exponential",
    "Uniform",
    "Pareto",
    "BoundedPareto",
    "Hyperexponential",
    "Weibull",
    "PointMassMixture",
    "AgeCutoffs",
    "RankFunction",
    "eta",
    "serpt_rank",
    "gittins_rank",
    "build_rank_function",
    "monotone_envelope",
    "age_cutoffs",
    "peak_age",
    "cutoff_growth_diagnostic",
    "LoadProfile",
    "load_profile",
    "lam_for_rho",
    "Mg1Metrics",
    "mg1_metrics",
    "mg1_metrics_alt",
    "KeyQuantities",
    "key_quantities",
    "MgkBound",
    "mgk_bound",
    "heavy_traffic_scale",
    "SimConfig",
    "SimReport",
    "JobRecord",
    "CoupledTrace",
    "next_crossing_time",
    "run",
    "run_coupled",
]
