"""Model-based risk-difference variance of Ge et al. (2011), kept as a comparator.

The estimator linearises ``g_n(beta) = mean expit(d_t' beta) - mean expit(d_s' beta)``
around the MLE and plugs in the inverse Fisher information. It ignores the
variability of ``g_n(beta)`` around the true risk difference and relies on
the working model being correct, so it undercovers. Reproducing that failure
is the purpose of this module; it is not meant for inference.

Scaling: ``vcov_beta`` estimates ``var(beta_hat)`` directly, i.e. it equals the
model-based covariance of ``sqrt(n) (beta_hat - beta)`` divided by ``n``. The
published formula ``n^-1 grad' V_M grad`` is therefore ``grad' vcov_beta grad``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .dataset import TrialDataset
from .errors import RankDeficient
from .glm import WorkingModelFit, build_design, counterfactual_design, expit


@dataclass(frozen=True)
class GeVarianceResult:
    se: float
    vcov_beta: np.ndarray
    gradient_gn: np.ndarray


def model_based_vcov(fit: WorkingModelFit, data: TrialDataset) -> np.ndarray:
    """Inverse observed Fisher information ``(D' W D)^-1`` at the fitted coefficients."""
    design = build_design(data)
    mu = expit(design @ fit.beta)
    info = design.T @ (design * (mu * (1.0 - mu))[:, None])
    try:
        factor = cho_factor(info)
    except LinAlgError:
        raise RankDeficient("Fisher information is not positive definite") from None
    cov = cho_solve(factor, np.eye(info.shape[0]))
    return (cov + cov.T) / 2


def g_n(beta: np.ndarray, data: TrialDataset, t: int, s: int) -> float:
    """Risk difference between arms ``t`` and ``s`` as a function of the coefficients."""
    mu_t = expit(counterfactual_design(data, t) @ beta)
    mu_s = expit(counterfactual_design(data, s) @ beta)
    return float(mu_t.mean() - mu_s.mean())


def ge_gradient(fit: WorkingModelFit, data: TrialDataset, t: int, s: int) -> np.ndarray:
    beta = fit.beta
    d_t = counterfactual_design(data, t)
    d_s = counterfactual_design(data, s)
    mu_t = expit(d_t @ beta)
    mu_s = expit(d_s @ beta)
    return (d_t.T @ (mu_t * (1 - mu_t)) - d_s.T @ (mu_s * (1 - mu_s))) / data.n_subjects


def ge_se_risk_difference(fit: WorkingModelFit, data: TrialDataset, t: int = 2, s: int = 1) -> GeVarianceResult:
    vcov = model_based_vcov(fit, data)
    grad = ge_gradient(fit, data, t, s)
    return GeVarianceResult(se=math.sqrt(max(float(grad @ vcov @ grad), 0.0)), vcov_beta=vcov, gradient_gn=grad)
