"""Locally Gaussian discretisation and parameter estimation for degenerate hypo-elliptic SDEs."""

from .bias import CONSTANTS, estimator_finite_difference_sigma, estimator_incorrect_drift
from .complete import ContrastResult, asymptotic_precision, contrast, estimate_complete
from .density import covariance_blocks, log_transition_density, mean_lg2, precision_and_logdet
from .errors import *  # noqa: F401,F403
from .experiments import TABLES, ExperimentConfig, replicate, run_checks
from .kalman import CondGaussSpec, estimate_partial, filter_trace, marginal_loglik
from .model import Dims, ModelSpec, ParamVector, check_condition_a2, generator_terms, memory_kernel_prony
from .models import MODEL_NAMES, builtin_model
from .optimize import OptimizerConfig, minimize
from .stochastics import (
    ObservationSet, PathSample, project_observed, read_csv, sample_increment, simulate, simulate_many,
    subsample, write_csv,
)

__version__ = "0.1.0"
