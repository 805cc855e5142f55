"""Covariate-adjusted g-computation for binary outcomes in k-arm randomized trials.

Fits a logistic working model, standardizes its predictions over the sample
to estimate arm-wise response means, and attaches a variance estimator that
stays consistent when the working model is wrong.
"""

__version__ = "0.1.0"

from .contrasts import (
    ContrastResult,
    ContrastSpec,
    contrast_gradient,
    contrast_inference,
    contrast_value,
)
from .dataset import TrialDataset
from .gcomp import (
    GComputationEstimate,
    estimate_theta,
    estimate_theta_augmented,
    gcomp_estimate,
    robust_vhat,
)
from .ge import GeVarianceResult, ge_gradient, ge_se_risk_difference, model_based_vcov
from .glm import (
    WorkingModelFit,
    build_design,
    expit,
    fit_logistic,
    predict_all_arms,
    score_residual_check,
)
from .simulation import SimulationConfig, SimulationSummary, run_monte_carlo, true_theta

__all__ = [
    "ContrastResult",
    "ContrastSpec",
    "GComputationEstimate",
    "GeVarianceResult",
    "SimulationConfig",
    "SimulationSummary",
    "TrialDataset",
    "WorkingModelFit",
    "build_design",
    "contrast_gradient",
    "contrast_inference",
    "contrast_value",
    "estimate_theta",
    "estimate_theta_augmented",
    "expit",
    "fit_logistic",
    "gcomp_estimate",
    "ge_gradient",
    "ge_se_risk_difference",
    "model_based_vcov",
    "predict_all_arms",
    "robust_vhat",
    "run_monte_carlo",
    "score_residual_check",
    "true_theta",
]
