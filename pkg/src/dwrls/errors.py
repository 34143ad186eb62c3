"""Exception hierarchy.

Numerical failures carry a ``context`` dict so the CLI can serialize them
as ``{code, module, message, context}``.
"""


class DwrlsError(Exception):
    """Base class for every error raised by this package."""

    code = "error"
    module = "dwrls"

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self):
        return {
            "code": self.code,
            "module": self.module,
            "message": self.message,
            "context": self.context,
        }


class InputError(DwrlsError, ValueError):
    """Invalid arguments: shapes, ranges, malformed files."""

    code = "invalid_input"


class NumericalError(DwrlsError):
    """A computation ran but did not produce a usable answer."""

    code = "numerical_failure"


class NoPositiveRule(NumericalError):
    """No nonnegative quadrature rule of the requested degree was found."""

    code = "no_positive_rule"
    module = "quadrature"

    def __init__(self, message, residual=float("nan"), **context):
        super().__init__(message, residual=residual, **context)
        self.residual = residual


class SolveError(NumericalError):
    code = "solve_failure"
    module = "solver"


class ShardFailure(NumericalError):
    """One or more servers failed to produce a local estimator."""

    code = "shard_failure"
    module = "distributed"

    def __init__(self, message, failed, **context):
        super().__init__(message, failed=list(failed), **context)
        self.failed = list(failed)
