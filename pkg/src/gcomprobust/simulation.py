"""Monte Carlo coverage study for covariate-adjusted g-computation.

Three outcome data-generating processes with ``X ~ N(0, 3^2)``::

    Case I    logit P(Y=1 | A, X) = -2 + 5 I(A=2) + X
    Case II   logit P(Y=1 | A=1, X) = -2 + X
              logit P(Y=1 | A=2, X) = 3 + 1.5 X - 0.01 X^2
    Case III  logit P(Y=1 | A, X) = -2 + 2 I(A=2) + 4 I(A=3) + X

The working model is linear in ``X``, so Case II is misspecified.

Randomness: replication ``r`` of a run seeded with ``seed`` draws from a
Philox-4x64 counter-based generator keyed by ``SeedSequence(seed,
spawn_key=(r,))``. Results therefore depend only on ``(seed, r)``, not on how
replications are spread over worker processes.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contrasts import ContrastSpec, contrast_inference, contrast_value, z_quantile
from .dataset import TrialDataset
from .errors import ConfigInvalid, GCompError
from .gcomp import GComputationEstimate, robust_vhat
from .ge import ge_se_risk_difference
from .glm import expit, fit_logistic, predict_all_arms

X_SD = 3.0
SCHEMES = ("simple", "complete")
ESTIMATORS = ("robust", "ge")


@dataclass(frozen=True)
class DgpCase:
    """Outcome law given as per-arm ``(intercept, slope, quadratic)`` logit coefficients."""

    id: str
    arm_coefs: tuple[tuple[float, float, float], ...]

    @property
    def n_arms(self) -> int:
        return len(self.arm_coefs)

    def linear_predictor(self, arms: np.ndarray, x: np.ndarray) -> np.ndarray:
        coefs = np.asarray(self.arm_coefs)[np.asarray(arms) - 1]
        return coefs[:, 0] + coefs[:, 1] * x + coefs[:, 2] * x**2

    def response_prob(self, arms, x) -> np.ndarray:
        return expit(self.linear_predictor(np.asarray(arms), np.asarray(x, dtype=float)))


CASES = {
    "I": DgpCase("I", ((-2.0, 1.0, 0.0), (3.0, 1.0, 0.0))),
    "II": DgpCase("II", ((-2.0, 1.0, 0.0), (3.0, 1.5, -0.01))),
    "III": DgpCase("III", ((-2.0, 1.0, 0.0), (0.0, 1.0, 0.0), (2.0, 1.0, 0.0))),
}


def get_case(case: str | DgpCase) -> DgpCase:
    if isinstance(case, DgpCase):
        return case
    key = str(case).upper().removeprefix("CASE_").removeprefix("CASE ")
    try:
        return CASES[key]
    except KeyError:
        raise ConfigInvalid(f"unknown case {case!r}; expected one of {sorted(CASES)}") from None


def default_contrasts(case: DgpCase) -> tuple[ContrastSpec, ...]:
    """Risk difference for two arms; all three kinds vs arm 1 otherwise."""
    if case.n_arms == 2:
        return (ContrastSpec("risk_difference", 2, 1),)
    return tuple(
        ContrastSpec(kind, t, 1)
        for t in range(2, case.n_arms + 1)
        for kind in ("risk_difference", "log_risk_ratio", "log_odds_ratio")
    )


def _expected_expit(a: float, b: float, c: float, nodes: int) -> float:
    u, w = np.polynomial.hermite.hermgauss(nodes)
    x = math.sqrt(2.0) * X_SD * u
    return float(w @ expit(a + b * x + c * x**2) / math.sqrt(math.pi))


def true_theta(case: str | DgpCase, tol: float = 1e-6) -> np.ndarray:
    """Arm-wise ``E expit(eta_t(X))`` by Gauss-Hermite quadrature.

    The node count doubles from 32 until successive values agree to ``tol``;
    256 nodes is the ceiling (``hermgauss`` overflows well beyond that).
    """
    case = get_case(case)
    out = []
    for a, b, c in case.arm_coefs:
        prev = _expected_expit(a, b, c, 32)
        for nodes in (64, 128, 256):
            cur = _expected_expit(a, b, c, nodes)
            if abs(cur - prev) < tol:
                break
            prev = cur
        else:
            raise ArithmeticError(f"quadrature for arm coefficients {(a, b, c)} did not reach {tol}")
        out.append(cur)
    return np.array(out)


def assign_simple(n: int, pi, rng: np.random.Generator) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    return rng.choice(len(pi), size=n, p=pi) + 1


def complete_counts(n: int, pi) -> np.ndarray:
    """Arm sizes ``n * pi`` rounded by largest remainder (ties go to the lower arm)."""
    target = n * np.asarray(pi, dtype=float)
    counts = np.floor(target + 1e-9).astype(np.int64)
    short = n - counts.sum()
    if short > 0:
        order = np.argsort(-(target - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def assign_complete(n: int, pi, rng: np.random.Generator) -> np.ndarray:
    counts = complete_counts(n, pi)
    return rng.permutation(np.repeat(np.arange(1, len(counts) + 1), counts))


def generate_outcomes(case: str | DgpCase, arms, covariates, rng: np.random.Generator) -> np.ndarray:
    arms = np.asarray(arms)
    x = np.asarray(covariates, dtype=float).reshape(-1)
    if arms.shape[0] != x.shape[0]:
        raise ValueError("arms and covariates differ in length")
    p = get_case(case).response_prob(arms, x)
    return (rng.random(arms.shape[0]) < p).astype(float)


def replication_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True)
class SimulationConfig:
    case: DgpCase
    n: int
    reps: int
    scheme: str
    seed: int
    contrasts: tuple[ContrastSpec, ...] = ()
    alpha: float = 0.05
    estimators: tuple[str, ...] = ("robust",)
    pi: tuple[float, ...] = ()
    pi_source: str = "design"

    def __post_init__(self):
        case = get_case(self.case)
        object.__setattr__(self, "case", case)
        k = case.n_arms
        if not self.contrasts:
            object.__setattr__(self, "contrasts", default_contrasts(case))
        else:
            object.__setattr__(self, "contrasts", tuple(self.contrasts))
        if not self.pi:
            object.__setattr__(self, "pi", (1.0 / k,) * k)
        object.__setattr__(self, "estimators", tuple(self.estimators))

        if self.reps < 1:
            raise ConfigInvalid("reps must be at least 1")
        if self.n < 4 * k:
            raise ConfigInvalid(f"n={self.n} too small for {k} arms (need n >= {4 * k})")
        if self.scheme not in SCHEMES:
            raise ConfigInvalid(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0 < self.alpha < 1:
            raise ConfigInvalid("alpha must lie in (0, 1)")
        if len(self.pi) != k or min(self.pi) <= 0 or abs(sum(self.pi) - 1) > 1e-9:
            raise ConfigInvalid(f"pi must be {k} positive probabilities summing to 1")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ConfigInvalid(f"estimators must be a non-empty subset of {ESTIMATORS}")
        for c in self.contrasts:
            if max(c.arm_t, c.arm_s) > k:
                raise ConfigInvalid(f"contrast {c.short()} refers to an arm beyond k={k}")
        if "ge" in self.estimators:
            if k != 2:
                raise ConfigInvalid("the Ge et al. comparator is only defined for two-arm cases")
            if any(c.kind != "risk_difference" for c in self.contrasts):
                raise ConfigInvalid("the Ge et al. comparator is only defined for the risk difference")


def simulate_dataset(config: SimulationConfig, index: int) -> TrialDataset:
    """Trial data for replication ``index``: arms, then ``X``, then outcomes."""
    rng = replication_rng(config.seed, index)
    assign = assign_simple if config.scheme == "simple" else assign_complete
    arms = assign(config.n, config.pi, rng)
    x = X_SD * rng.standard_normal(config.n)
    y = generate_outcomes(config.case, arms, x, rng)
    return TrialDataset(arms, y, x[:, None], np.asarray(config.pi), config.case.n_arms)


@dataclass
class ReplicationBlock:
    """Index-addressed results for replications ``start .. start + len - 1``.

    Column ``j`` of the ``(reps, m)`` arrays is summary slot ``j``: one per
    (contrast, estimator) pair in :func:`_slots` order. ``reason`` is empty
    for successful slots.
    """

    start: int
    estimate: np.ndarray
    se: np.ndarray
    covered: np.ndarray
    reason: np.ndarray


def _slots(config: SimulationConfig) -> list[tuple[ContrastSpec, str]]:
    return [(c, e) for c in config.contrasts for e in config.estimators]


def run_replication(config: SimulationConfig, index: int, truths: dict | None = None) -> dict:
    """Run one replication; returns per-slot ``(estimate, se, covered)`` or a failure reason."""
    if truths is None:
        theta0 = true_theta(config.case)
        truths = {c: contrast_value(c, theta0) for c in config.contrasts}
    z = z_quantile(config.alpha)
    out = {}
    try:
        data = simulate_dataset(config, index)
        fit = fit_logistic(data)
    except GCompError as err:
        reason = getattr(err, "reason", type(err).__name__)
        return {slot: reason for slot in _slots(config)}

    mu = predict_all_arms(fit, data)
    theta = mu.mean(axis=0)
    est = None
    if "robust" in config.estimators:
        try:
            vhat = robust_vhat(fit, data, config.pi_source, predictions=mu)
            est = GComputationEstimate(theta, vhat, data.n_subjects, data.pi, config.pi_source)
        except GCompError as err:
            est = getattr(err, "reason", type(err).__name__)
    ge = None
    if "ge" in config.estimators:
        try:
            ge = {c: ge_se_risk_difference(fit, data, c.arm_t, c.arm_s).se for c in config.contrasts}
        except GCompError as err:
            ge = getattr(err, "reason", type(err).__name__)

    for c in config.contrasts:
        truth = truths[c]
        if "robust" in config.estimators:
            if isinstance(est, str):
                out[(c, "robust")] = est
            else:
                try:
                    res = contrast_inference(c, est, config.alpha)
                    out[(c, "robust")] = (res.estimate, res.se, res.covers(truth))
                except GCompError as err:
                    out[(c, "robust")] = getattr(err, "reason", type(err).__name__)
        if "ge" in config.estimators:
            if isinstance(ge, str):
                out[(c, "ge")] = ge
            else:
                value = contrast_value(c, theta)
                se = ge[c]
                out[(c, "ge")] = (value, se, value - z * se <= truth <= value + z * se)
    return out


def _run_block(config: SimulationConfig, start: int, stop: int) -> ReplicationBlock:
    theta0 = true_theta(config.case)
    truths = {c: contrast_value(c, theta0) for c in config.contrasts}
    slots = _slots(config)
    size = stop - start
    estimate = np.full((size, len(slots)), np.nan)
    se = np.full((size, len(slots)), np.nan)
    covered = np.zeros((size, len(slots)), dtype=bool)
    reason = np.full((size, len(slots)), "", dtype=object)
    for row, index in enumerate(range(start, stop)):
        result = run_replication(config, index, truths)
        for j, slot in enumerate(slots):
            r = result[slot]
            if isinstance(r, str):
                reason[row, j] = r
            else:
                estimate[row, j], se[row, j], covered[row, j] = r
    return ReplicationBlock(start, estimate, se, covered, reason)


@dataclass(frozen=True)
class SummaryRow:
    contrast: ContrastSpec
    estimator: str
    truth: float
    mean: float | None
    sd: float | None
    avg_se: float | None
    cp: float | None
    n_used: int
    n_failed: int
    failures: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SimulationSummary:
    config: SimulationConfig
    rows: tuple[SummaryRow, ...]

    def row(self, contrast: ContrastSpec | str, estimator: str = "robust") -> SummaryRow:
        if isinstance(contrast, str):
            contrast = ContrastSpec.parse(contrast)
        for r in self.rows:
            if r.contrast == contrast and r.estimator == estimator:
                return r
        raise KeyError((contrast, estimator))


def _summarize(config: SimulationConfig, block: ReplicationBlock) -> SimulationSummary:
    theta0 = true_theta(config.case)
    rows = []
    for j, (c, e) in enumerate(_slots(config)):
        ok = block.reason[:, j] == ""
        used = int(ok.sum())
        est = block.estimate[ok, j]
        rows.append(
            SummaryRow(
                contrast=c,
                estimator=e,
                truth=contrast_value(c, theta0),
                mean=float(np.mean(est)) if used else None,
                sd=float(np.std(est, ddof=1)) if used >= 2 else None,
                avg_se=float(np.mean(block.se[ok, j])) if used else None,
                cp=100.0 * float(np.mean(block.covered[ok, j])) if used else None,
                n_used=used,
                n_failed=config.reps - used,
                failures=dict(sorted(Counter(block.reason[~ok, j]).items())),
            )
        )
    return SimulationSummary(config, tuple(rows))


def run_monte_carlo(config: SimulationConfig, workers: int = 1) -> SimulationSummary:
    """Run ``config.reps`` replications and summarize each (contrast, estimator) slot.

    Replications that fail (separation, non-convergence, too few subjects in an
    arm, ...) are excluded from the summary and tallied by reason. The result
    is bit-identical for any ``workers``: blocks are written into
    index-addressed slots and reduced in index order.
    """
    if not isinstance(config, SimulationConfig):
        raise ConfigInvalid("run_monte_carlo needs a SimulationConfig")
    if workers < 1:
        raise ConfigInvalid("workers must be at least 1")
    workers = min(workers, config.reps)
    if workers == 1:
        block = _run_block(config, 0, config.reps)
    else:
        bounds = np.linspace(0, config.reps, 4 * workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_block, config, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:])
                if b > a
            ]
            parts = [f.result() for f in futures]
        block = ReplicationBlock(
            0,
            np.concatenate([p.estimate for p in parts]),
            np.concatenate([p.se for p in parts]),
            np.concatenate([p.covered for p in parts]),
            np.concatenate([p.reason for p in parts]),
        )
    return _summarize(config, block)
