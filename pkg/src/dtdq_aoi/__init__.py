"""Exact Age-of-Information analysis of discrete-time dual-queue systems with freezing."""

__version__ = "0.1.0"

from .dph import (  # noqa: E402
    DphDistribution,
    dph_from_pmf,
    dph_geometric,
    dph_mean,
    dph_pmf,
    dph_sample,
    dph_triangular,
    dph_uniform,
    dph_variance,
)
from .state_space import enumerate_amc, enumerate_rmc, index_of, state_of  # noqa: E402
from .amc import S1, S2, Priority, SystemConfig, build_amc, validate_amc  # noqa: E402
from .rmc import build_model, build_rmc, initial_vector, rmc_steady_state  # noqa: E402
from .metrics import (  # noqa: E402
    AoiReport,
    analyze,
    aoi_mean,
    aoi_pmf,
    aoi_second_moment,
    obsolete_probability,
    paoi_mean,
    paoi_pmf,
)
from .simulator import SimResult, simulate, simulate_amc_initial_census  # noqa: E402
from .optimizer import find_optimal_k, freezing_gain, sweep_mean, sweep_nonidentical, sweep_variance  # noqa: E402

__all__ = [
    "DphDistribution", "dph_from_pmf", "dph_geometric", "dph_mean", "dph_pmf", "dph_sample",
    "dph_triangular", "dph_uniform", "dph_variance",
    "enumerate_amc", "enumerate_rmc", "index_of", "state_of",
    "S1", "S2", "Priority", "SystemConfig", "build_amc", "validate_amc",
    "build_model", "build_rmc", "initial_vector", "rmc_steady_state",
    "AoiReport", "analyze", "aoi_mean", "aoi_pmf", "aoi_second_moment", "obsolete_probability",
    "paoi_mean", "paoi_pmf",
    "SimResult", "simulate", "simulate_amc_initial_census",
    "find_optimal_k", "freezing_gain", "sweep_mean", "sweep_nonidentical", "sweep_variance",
]
