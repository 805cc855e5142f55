from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, TooFewSubjects


@dataclass(frozen=True)
class TrialDataset:
    """Per-subject data from a k-arm randomized trial with a binary outcome.

    Arms are labelled ``1..k``. ``covariates`` is always two-dimensional with
    shape ``(n, p)``; ``p`` may be zero. ``pi`` holds the allocation
    probabilities, either from the design or estimated as ``n_t / n``.
    """

    arm: np.ndarray
    outcome: np.ndarray
    covariates: np.ndarray
    pi: np.ndarray
    n_arms: int = field(default=0)

    def __post_init__(self):
        arm = np.asarray(self.arm)
        outcome = np.asarray(self.outcome, dtype=float)
        cov = np.asarray(self.covariates, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        n = arm.shape[0]
        if cov.ndim == 1:
            cov = cov.reshape(n, -1) if n else cov.reshape(0, 0)
        k = self.n_arms or len(pi)

        if arm.ndim != 1 or outcome.shape != (n,) or cov.ndim != 2 or cov.shape[0] != n:
            raise DataError("arm, outcome and covariates must have one row per subject")
        if k < 2:
            raise DataError(f"need at least two arms, got {k}")
        if len(pi) != k:
            raise DataError(f"pi has {len(pi)} entries for {k} arms")
        if np.any(pi <= 0) or abs(pi.sum() - 1.0) > 1e-9:
            raise DataError(f"pi must be positive and sum to 1, got {pi.tolist()}")
        if not np.issubdtype(arm.dtype, np.integer):
            if not np.all(np.equal(np.mod(arm, 1), 0)):
                raise DataError("arm indices must be integers")
            arm = arm.astype(np.int64)
        bad = np.flatnonzero((arm < 1) | (arm > k))
        if bad.size:
            raise DataError(f"row {bad[0]}: arm index {arm[bad[0]]} outside 1..{k}")
        bad = np.flatnonzero((outcome != 0) & (outcome != 1))
        if bad.size:
            raise DataError(f"row {bad[0]}: outcome {outcome[bad[0]]!r} is not 0 or 1")
        if not np.all(np.isfinite(cov)):
            raise DataError("covariates must be finite")
        counts = np.bincount(arm, minlength=k + 1)[1:]
        if np.any(counts < 2):
            t = int(np.argmin(counts)) + 1
            raise TooFewSubjects(f"arm {t} has {counts[t - 1]} subjects; at least 2 required")

        object.__setattr__(self, "arm", arm)
        object.__setattr__(self, "outcome", outcome)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "n_arms", k)

    @classmethod
    def from_arrays(cls, arm, outcome, covariates=None, pi=None, n_arms=None) -> TrialDataset:
        """Build a dataset, defaulting ``pi`` to the empirical arm fractions."""
        arm = np.asarray(arm)
        if covariates is None:
            covariates = np.empty((arm.shape[0], 0))
        if pi is None:
            k = n_arms or int(np.max(arm))
            counts = np.bincount(arm.astype(np.int64), minlength=k + 1)[1:]
            pi = counts / counts.sum()
        return cls(arm=arm, outcome=outcome, covariates=covariates, pi=pi, n_arms=n_arms or 0)

    @property
    def n_subjects(self) -> int:
        return self.arm.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def arm_counts(self) -> np.ndarray:
        return np.bincount(self.arm, minlength=self.n_arms + 1)[1:]

    def with_pi(self, pi) -> TrialDataset:
        return TrialDataset(self.arm, self.outcome, self.covariates, pi, self.n_arms)
