"""Exception hierarchy.

Fitting failures (``Separation``, ``NonConvergence``, ``RankDeficient``) share
the ``FitError`` base so callers such as the Monte Carlo engine can treat them
as one class of excluded replication.
"""


class GCompError(Exception):
    """Base class for all package errors."""


class DataError(GCompError, ValueError):
    """Trial data violates an invariant (bad outcome value, arm label, ...)."""


class DimensionMismatch(GCompError, ValueError):
    pass


class FitError(GCompError):
    """The working logistic model could not be fitted."""

    reason = "fit_error"


class NonConvergence(FitError):
    reason = "non_convergence"


class Separation(FitError):
    reason = "separation"


class RankDeficient(FitError):
    reason = "rank_deficient"


class EmptyArm(GCompError):
    reason = "empty_arm"


class TooFewSubjects(DataError):
    reason = "too_few_subjects"


class NegativeVariance(GCompError):
    """A diagonal entry of the robust covariance estimate is negative."""

    reason = "negative_variance"

    def __init__(self, arm: int, value: float):
        self.arm = arm
        self.value = value
        super().__init__(f"robust variance for arm {arm} is negative: {value:.6g}")


class NegativeQuadraticForm(GCompError):
    reason = "negative_quadratic_form"


class BoundaryTheta(GCompError, ValueError):
    """A response mean sits on 0 or 1 where a log contrast is undefined."""

    reason = "boundary_theta"


class ConfigInvalid(GCompError, ValueError):
    pass
