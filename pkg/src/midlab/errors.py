"""Exception hierarchy shared by all midlab modules."""


class MidlabError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MidlabError, ValueError):
    """Invalid input: bad shapes, roles, rates, or configuration values."""


class SingularityError(MidlabError):
    """A covariance matrix is singular or numerically not positive definite."""


class SingularPivotError(SingularityError):
    """A sweep pivot is non-positive, so the pivot submatrix is not positive definite."""


class UnusableColumnError(MidlabError):
    """A column has too few observed values to estimate anything from it."""

    def __init__(self, column: str, n_observed: int):
        self.column = column
        self.n_observed = n_observed
        super().__init__(
            f"column {column!r} has {n_observed} observed value(s); at least 2 are required"
        )


class InsufficientDataError(MidlabError):
    """Too few rows for the requested estimate."""


class CollinearityError(MidlabError):
    """The regression design matrix is rank deficient."""


class InsufficientImputationsError(MidlabError):
    """Fewer than two imputations were requested or supplied."""


class TooFewObservedYError(MidlabError):
    """Not enough rows with an observed outcome to fit the analysis model."""


class AllYImputedError(TooFewObservedYError):
    """Every outcome value was imputed; deletion would leave no rows."""
