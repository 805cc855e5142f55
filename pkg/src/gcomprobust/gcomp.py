"""G-computation estimator of arm-wise response means and its robust covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TrialDataset
from .errors import EmptyArm, NegativeVariance, TooFewSubjects
from .glm import WorkingModelFit, fit_logistic, predict_all_arms

PI_SOURCES = ("design", "empirical")


@dataclass(frozen=True)
class GComputationEstimate:
    """Point estimate ``theta`` and ``vhat``, the covariance of ``sqrt(n) (theta_hat - theta)``."""

    theta: np.ndarray
    vhat: np.ndarray
    n: int
    pi: np.ndarray
    pi_source: str = "design"

    @property
    def arm_se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.vhat) / self.n)


def estimate_theta(fit: WorkingModelFit, data: TrialDataset) -> np.ndarray:
    return predict_all_arms(fit, data).mean(axis=0)


def estimate_theta_augmented(fit: WorkingModelFit, data: TrialDataset) -> np.ndarray:
    """Prediction mean plus inverse-probability-weighted residual correction.

    Uses ``pi_hat_t = n_t / n``. Equal to :func:`estimate_theta` whenever ``fit``
    solves the score equations; differs otherwise.
    """
    mu = predict_all_arms(fit, data)
    n, k = mu.shape
    idx = data.arm - 1
    counts = np.bincount(idx, minlength=k)
    if np.any(counts == 0):
        raise EmptyArm(f"arm {int(np.argmin(counts)) + 1} has no subjects")
    resid = data.outcome - mu[np.arange(n), idx]
    resid_sums = np.bincount(idx, weights=resid, minlength=k)
    # n^-1 sum I(A=t)/(n_t/n) * r  ==  sum_{A=t} r / n_t
    return resid_sums / counts + mu.mean(axis=0)


def _centered(a: np.ndarray) -> np.ndarray:
    return a - a.mean(axis=0)


def robust_vhat(
    fit: WorkingModelFit,
    data: TrialDataset,
    pi_source: str = "design",
    predictions: np.ndarray | None = None,
) -> np.ndarray:
    """Model-robust ``k x k`` covariance estimate of ``sqrt(n) (theta_hat - theta)``.

    Diagonal: ``S2_r[t] / pi[t] + 2 Q_y[t, t] - S2_mu[t]``; off-diagonal
    ``(t, s)``: ``Q_y[t, s] + Q_y[s, t] - Q_mu[t, s]``. Here ``Q_y[t, s]`` is the
    sample covariance of ``Y`` and ``mu_s(X)`` among arm-``t`` subjects,
    ``S2_r[t]`` the sample variance of ``Y - mu_t(X)`` among arm-``t`` subjects,
    and ``S2_mu``, ``Q_mu`` the sample (co)variances of the predictions over
    all subjects. Every sample moment uses the ``m - 1`` denominator.

    Parameters
    ----------
    fit, data
        Fitted working model and the data it was fitted on.
    pi_source : {"design", "empirical"}
        Take ``pi`` from ``data.pi`` or from the observed ``n_t / n``.
    predictions : ndarray, optional
        Precomputed :func:`predict_all_arms` output.

    Raises
    ------
    TooFewSubjects
        Some arm has fewer than two subjects.
    NegativeVariance
        A diagonal entry comes out negative; it is reported, not clamped.
    """
    if pi_source not in PI_SOURCES:
        raise ValueError(f"pi_source must be one of {PI_SOURCES}, got {pi_source!r}")
    mu = predict_all_arms(fit, data) if predictions is None else predictions
    n, k = mu.shape
    y = data.outcome
    counts = data.arm_counts
    if np.any(counts < 2) or n < 3:
        raise TooFewSubjects(f"arm counts {counts.tolist()}; each arm needs at least 2")
    pi = data.pi if pi_source == "design" else counts / n

    # Q_mu[t, s] over all subjects; S2_mu is its diagonal
    mu_c = _centered(mu)
    q_mu = mu_c.T @ mu_c / (n - 1)

    q_y = np.empty((k, k))
    s2_r = np.empty(k)
    for t in range(k):
        in_arm = data.arm == t + 1
        m = counts[t]
        y_c = y[in_arm] - y[in_arm].mean()
        mu_arm_c = _centered(mu[in_arm])
        q_y[t] = y_c @ mu_arm_c / (m - 1)
        r = y[in_arm] - mu[in_arm, t]
        s2_r[t] = np.sum((r - r.mean()) ** 2) / (m - 1)

    vhat = np.empty((k, k))
    for t in range(k):
        vhat[t, t] = s2_r[t] / pi[t] + 2.0 * q_y[t, t] - q_mu[t, t]
        for s in range(t + 1, k):
            vhat[t, s] = vhat[s, t] = q_y[t, s] + q_y[s, t] - q_mu[t, s]

    for t in range(k):
        if vhat[t, t] < 0:
            raise NegativeVariance(t + 1, float(vhat[t, t]))
    return vhat


def gcomp_estimate(
    data: TrialDataset,
    fit: WorkingModelFit | None = None,
    pi_source: str = "design",
) -> GComputationEstimate:
    """Fit (unless given), then return ``theta_hat`` with its robust covariance."""
    if fit is None:
        fit = fit_logistic(data)
    mu = predict_all_arms(fit, data)
    vhat = robust_vhat(fit, data, pi_source, predictions=mu)
    pi = data.pi if pi_source == "design" else data.arm_counts / data.n_subjects
    return GComputationEstimate(
        theta=mu.mean(axis=0), vhat=vhat, n=data.n_subjects, pi=np.asarray(pi), pi_source=pi_source
    )
