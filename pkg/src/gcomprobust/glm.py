"""Working logistic model fitted by Newton-Raphson (IRLS).

The linear predictor is ``beta_arm[A] + X @ beta_cov``: one indicator column
per arm and no separate intercept, so the canonical-link score equations hold
arm by arm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr, solve_triangular

from .dataset import TrialDataset
from .errors import DimensionMismatch, NonConvergence, RankDeficient, Separation

SCORE_TOL = 1e-10
MAX_ITER = 50
MAX_HALVINGS = 10
ETA_GUARD = 30.0
PIVOT_TOL = 1e-12


def expit(x):
    """Logistic function ``exp(x) / (1 + exp(x))``, stable for large ``|x|``."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WorkingModelFit:
    beta_arm: np.ndarray
    beta_cov: np.ndarray
    iterations: int
    converged: bool
    final_score_norm: float

    @property
    def beta(self) -> np.ndarray:
        return np.concatenate([self.beta_arm, self.beta_cov])

    @property
    def n_arms(self) -> int:
        return self.beta_arm.shape[0]

    def with_beta(self, beta_arm=None, beta_cov=None) -> WorkingModelFit:
        """Copy with replaced coefficients, e.g. to evaluate a non-MLE point."""
        return WorkingModelFit(
            beta_arm=self.beta_arm if beta_arm is None else np.asarray(beta_arm, dtype=float),
            beta_cov=self.beta_cov if beta_cov is None else np.asarray(beta_cov, dtype=float),
            iterations=self.iterations,
            converged=False,
            final_score_norm=float("nan"),
        )


def build_design(data: TrialDataset) -> np.ndarray:
    """``n x (k + p)`` design: one-hot arm indicators followed by raw covariates."""
    n, k = data.n_subjects, data.n_arms
    design = np.zeros((n, k + data.n_covariates))
    design[np.arange(n), data.arm - 1] = 1.0
    design[:, k:] = data.covariates
    return design


def counterfactual_design(data: TrialDataset, arm: int) -> np.ndarray:
    """Design rows every subject would have if assigned to ``arm`` (1-based)."""
    n, k = data.n_subjects, data.n_arms
    design = np.zeros((n, k + data.n_covariates))
    design[:, arm - 1] = 1.0
    design[:, k:] = data.covariates
    return design


def log_likelihood(design: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = design @ beta
    return float(y @ eta - np.logaddexp(0.0, eta).sum())


def _newton_step(design, y, mu):
    """Solve ``(D'WD) step = D'(y - mu)`` by pivoted QR of ``sqrt(W) D``."""
    sw = np.sqrt(mu * (1.0 - mu))
    z = design * sw[:, None]
    q, r, piv = qr(z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[0] == 0.0 or diag[-1] / diag[0] < PIVOT_TOL:
        raise RankDeficient(
            f"weighted design is singular (pivot ratio {diag[-1] / max(diag[0], 1e-300):.3g})"
        )
    step = np.empty(design.shape[1])
    step[piv] = solve_triangular(r, q.T @ ((y - mu) / sw))
    return step


def fit_logistic(
    data: TrialDataset,
    *,
    tol: float = SCORE_TOL,
    max_iter: int = MAX_ITER,
    max_halvings: int = MAX_HALVINGS,
    eta_guard: float = ETA_GUARD,
    callback=None,
) -> WorkingModelFit:
    """Maximum likelihood fit of the working logistic model.

    Newton-Raphson from ``beta = 0`` with step-halving whenever a full step
    would lower the log-likelihood. Iteration stops once the max-norm of the
    score ``D'(y - mu)`` is at most ``tol * n``.

    Raises
    ------
    Separation
        An iterate has a linear predictor beyond ``eta_guard`` in absolute value.
    RankDeficient
        The weighted normal equations are numerically singular.
    NonConvergence
        ``max_iter`` iterations without meeting the score tolerance.

    ``callback(iteration, beta, loglik)``, if given, sees every accepted iterate.
    """
    design = build_design(data)
    y = data.outcome
    n, k = data.n_subjects, data.n_arms
    threshold = tol * n

    beta = np.zeros(design.shape[1])
    eta = np.zeros(n)
    loglik = log_likelihood(design, y, beta)
    score_norm = np.inf
    for it in range(max_iter + 1):
        mu = expit(eta)
        score_norm = float(np.max(np.abs(design.T @ (y - mu))))
        if score_norm <= threshold:
            # one polishing step takes the score to rounding level, so the
            # arm-wise residual identities hold far below the stopping rule
            cand = beta + _newton_step(design, y, mu)
            cand_norm = float(np.max(np.abs(design.T @ (y - expit(design @ cand)))))
            if cand_norm < score_norm:
                beta, score_norm = cand, cand_norm
            return WorkingModelFit(beta[:k].copy(), beta[k:].copy(), it, True, score_norm)
        if it == max_iter:
            break

        step = _newton_step(design, y, mu)
        for _ in range(max_halvings + 1):
            cand = beta + step
            cand_eta = design @ cand
            cand_loglik = float(y @ cand_eta - np.logaddexp(0.0, cand_eta).sum())
            if cand_loglik >= loglik:
                break
            step = step / 2
        beta, eta, loglik = cand, cand_eta, cand_loglik
        if callback is not None:
            callback(it + 1, beta, loglik)
        if np.max(np.abs(eta)) > eta_guard:
            raise Separation(
                f"|linear predictor| reached {np.max(np.abs(eta)):.1f} at iteration {it + 1}"
            )

    raise NonConvergence(
        f"score max-norm {score_norm:.3g} above {threshold:.3g} after {max_iter} iterations"
    )


def predict_all_arms(fit: WorkingModelFit, data: TrialDataset) -> np.ndarray:
    """``n x k`` matrix of counterfactual response probabilities."""
    if fit.beta_cov.shape[0] != data.n_covariates or fit.n_arms != data.n_arms:
        raise DimensionMismatch(
            f"fit has {fit.n_arms} arms / {fit.beta_cov.shape[0]} covariates, "
            f"data has {data.n_arms} / {data.n_covariates}"
        )
    lin = data.covariates @ fit.beta_cov
    return expit(lin[:, None] + fit.beta_arm[None, :])


def score_residual_check(fit: WorkingModelFit, data: TrialDataset) -> np.ndarray:
    """Per-arm residual sums ``sum_{A_i = t} (Y_i - mu_t(X_i))``; zero at the MLE."""
    mu = predict_all_arms(fit, data)
    idx = data.arm - 1
    resid = data.outcome - mu[np.arange(data.n_subjects), idx]
    return np.bincount(idx, weights=resid, minlength=data.n_arms)
