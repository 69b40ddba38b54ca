"""Two-stage Deming regression.

Straight-line fits between two variables that were each estimated or observed
with known error variances, under three error structures:

* A -- unknown errors with a fixed variance ratio (simple Deming),
* B -- known per-observation variances only (generalized Deming, York),
* C -- known variances plus an unknown extra component (maximum likelihood).
"""

__version__ = "0.1.0"

from .core import (
    Dataset,
    DemingFit,
    FirstStageRecord,
    Observation,
    TrueValueEstimates,
    apply_weights,
    parse_dataset,
    parse_first_stage,
)
from .deming_ls import estimate_true_values, fit_generalized_deming, fit_simple_deming, fit_wls
from .deming_mle import fit_mle_deming, mle_log_likelihood, profile_true_values
from .inference import bootstrap_fit, pi_coverage, prediction_interval, prediction_variance
from .selection import compute_r_criterion, likelihood_ratio_test, select_scenario
from .simulation import SimulationSpec, generate_dataset, run_coverage_study
from .transforms import TransformSpec, propagate_variance, transform_dataset

__all__ = [
    "Dataset",
    "DemingFit",
    "FirstStageRecord",
    "Observation",
    "SimulationSpec",
    "TransformSpec",
    "TrueValueEstimates",
    "apply_weights",
    "bootstrap_fit",
    "compute_r_criterion",
    "estimate_true_values",
    "fit_generalized_deming",
    "fit_mle_deming",
    "fit_simple_deming",
    "fit_wls",
    "generate_dataset",
    "likelihood_ratio_test",
    "mle_log_likelihood",
    "parse_dataset",
    "parse_first_stage",
    "pi_coverage",
    "prediction_interval",
    "prediction_variance",
    "profile_true_values",
    "propagate_variance",
    "run_coverage_study",
    "select_scenario",
    "transform_dataset",
]
