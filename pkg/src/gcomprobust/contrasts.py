"""Delta-method inference for risk difference, log risk ratio and log odds ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import BoundaryTheta, NegativeQuadraticForm
from .gcomp import GComputationEstimate

KINDS = ("risk_difference", "log_risk_ratio", "log_odds_ratio")
_SHORT = {"rd": "risk_difference", "rr": "log_risk_ratio", "or": "log_odds_ratio"}
_LOG_KINDS = ("log_risk_ratio", "log_odds_ratio")


@dataclass(frozen=True)
class ContrastSpec:
    """Contrast of arm ``arm_t`` against reference arm ``arm_s`` (both 1-based)."""

    kind: str
    arm_t: int
    arm_s: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown contrast kind {self.kind!r}; expected one of {KINDS}")
        if self.arm_t == self.arm_s:
            raise ValueError("a contrast needs two different arms")
        if self.arm_t < 1 or self.arm_s < 1:
            raise ValueError("arm indices are 1-based")

    @classmethod
    def parse(cls, text: str) -> ContrastSpec:
        """Parse ``KIND:t,s`` such as ``rd:2,1`` or ``log_odds_ratio:3,1``."""
        try:
            kind, arms = text.split(":")
            t, s = (int(a) for a in arms.split(","))
        except ValueError:
            raise ValueError(f"contrast {text!r} is not of the form KIND:t,s") from None
        return cls(_SHORT.get(kind.strip().lower(), kind.strip().lower()), t, s)

    @property
    def is_log(self) -> bool:
        return self.kind in _LOG_KINDS

    def label(self) -> str:
        t, s = self.arm_t, self.arm_s
        if self.kind == "risk_difference":
            return f"theta{t}-theta{s}"
        if self.kind == "log_risk_ratio":
            return f"log(theta{t}/theta{s})"
        return f"logOR(theta{t},theta{s})"

    def short(self) -> str:
        inv = {v: k for k, v in _SHORT.items()}
        return f"{inv[self.kind]}:{self.arm_t},{self.arm_s}"


@dataclass(frozen=True)
class ContrastResult:
    spec: ContrastSpec
    estimate: float
    se: float
    ci_low: float
    ci_high: float
    alpha: float

    @property
    def reporting_estimate(self) -> float:
        return math.exp(self.estimate) if self.spec.is_log else self.estimate

    @property
    def reporting_low(self) -> float:
        return math.exp(self.ci_low) if self.spec.is_log else self.ci_low

    @property
    def reporting_high(self) -> float:
        return math.exp(self.ci_high) if self.spec.is_log else self.ci_high

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


def _check_arms(spec: ContrastSpec, theta: np.ndarray) -> tuple[float, float]:
    k = len(theta)
    if spec.arm_t > k or spec.arm_s > k:
        raise ValueError(f"contrast {spec.short()} refers to an arm beyond k={k}")
    tt, ts = float(theta[spec.arm_t - 1]), float(theta[spec.arm_s - 1])
    if spec.is_log:
        if not (0 < tt < 1 and 0 < ts < 1):
            raise BoundaryTheta(f"{spec.kind} undefined at theta=({tt}, {ts})")
    elif not (0 <= tt <= 1 and 0 <= ts <= 1):
        raise BoundaryTheta(f"risk difference needs theta in [0, 1], got ({tt}, {ts})")
    return tt, ts


def contrast_value(spec: ContrastSpec, theta) -> float:
    tt, ts = _check_arms(spec, np.asarray(theta, dtype=float))
    if spec.kind == "risk_difference":
        return tt - ts
    if spec.kind == "log_risk_ratio":
        return math.log(tt) - math.log(ts)
    return (math.log(tt) - math.log1p(-tt)) - (math.log(ts) - math.log1p(-ts))


def contrast_gradient(spec: ContrastSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    tt, ts = _check_arms(spec, theta)
    grad = np.zeros(len(theta))
    if spec.kind == "risk_difference":
        gt, gs = 1.0, -1.0
    elif spec.kind == "log_risk_ratio":
        gt, gs = 1.0 / tt, -1.0 / ts
    else:
        gt, gs = 1.0 / (tt * (1.0 - tt)), -1.0 / (ts * (1.0 - ts))
    grad[spec.arm_t - 1] = gt
    grad[spec.arm_s - 1] = gs
    return grad


def z_quantile(alpha: float) -> float:
    """Two-sided normal critical value ``z_{1 - alpha/2}``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(ndtri(1.0 - alpha / 2.0))


def contrast_inference(
    spec: ContrastSpec, est: GComputationEstimate, alpha: float = 0.05
) -> ContrastResult:
    """Wald interval for ``f(theta)`` with ``se = sqrt(grad' V grad / n)``.

    Log contrasts are estimated and intervalled on the log scale; the
    ``reporting_*`` properties exponentiate them.
    """
    z = z_quantile(alpha)
    value = contrast_value(spec, est.theta)
    grad = contrast_gradient(spec, est.theta)
    quad = float(grad @ est.vhat @ grad)
    if quad < 0:
        raise NegativeQuadraticForm(f"delta-method variance {quad:.3g} < 0 for {spec.short()}")
    se = math.sqrt(quad / est.n)
    return ContrastResult(spec, value, se, value - z * se, value + z * se, alpha)
