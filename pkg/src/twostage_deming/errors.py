"""Exception hierarchy.

Every exception carries an ``exit_code`` so the command-line front end can map
failures onto distinct process exit statuses without a lookup table.
"""


class DemingError(Exception):
    exit_code = 1


class UsageError(DemingError, ValueError):
    exit_code = 2


class ParseError(DemingError, ValueError):
    """Malformed input text (bad number, missing column)."""

    exit_code = 3

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(DemingError, ValueError):
    """Well-formed input that violates an invariant (negative variance...)."""

    exit_code = 4

    def __init__(self, message, row=None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


class InsufficientDataError(ValidationError):
    pass


class DomainError(DemingError, ValueError):
    """A value lies outside the domain of the requested transform."""

    exit_code = 5

    def __init__(self, message, index=None):
        if index is not None:
            message = f"{message} (record {index})"
        super().__init__(message)
        self.index = index


class DegenerateFitError(DemingError, ArithmeticError):
    exit_code = 6


class SingularWeightError(DemingError, ArithmeticError):
    exit_code = 7


class SingularLikelihoodError(DemingError, ArithmeticError):
    exit_code = 7


class ConvergenceError(DemingError, ArithmeticError):
    exit_code = 8

    def __init__(self, message, last=None, trace=None):
        super().__init__(message)
        self.last = last
        self.trace = trace or []


EXIT_CODES = {
    0: "success",
    UsageError.exit_code: "usage error (bad flags, level outside (0,1), mismatched fits)",
    ParseError.exit_code: "parse error (malformed CSV/JSON, missing column)",
    ValidationError.exit_code: "validation error (negative variance, non-positive weight, n < 3)",
    DomainError.exit_code: "transform domain error",
    DegenerateFitError.exit_code: "degenerate fit (all x equal, zero covariance)",
    SingularWeightError.exit_code: "singular weights / likelihood (zero variances)",
    ConvergenceError.exit_code: "estimator did not converge",
}
