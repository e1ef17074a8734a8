"""Regime switching particle filtering with online model selection."""
from .errors import ConfigurationError, DegenerateWeightsError, InstanceTooLargeError
from .filter import FilterConfig, FilterOutput, ParticleSystem, run_filter
from .mmpf import FilterBank, mmpf_run
from .models import CandidateModelSet, SyntheticModelParams, SyntheticModelSet, make_benchmark_model_set
from .regimes import (
    IndependentDynamics,
    MarkovDynamics,
    PolyaDynamics,
    RegimeHistory,
    banded_transition_matrix,
)

__all__ = [
    "CandidateModelSet",
    "ConfigurationError",
    "DegenerateWeightsError",
    "FilterBank",
    "FilterConfig",
    "FilterOutput",
    "IndependentDynamics",
    "InstanceTooLargeError",
    "MarkovDynamics",
    "ParticleSystem",
    "PolyaDynamics",
    "RegimeHistory",
    "SyntheticModelParams",
    "SyntheticModelSet",
    "banded_transition_matrix",
    "make_benchmark_model_set",
    "mmpf_run",
    "run_filter",
]
