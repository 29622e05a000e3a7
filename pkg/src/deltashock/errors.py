"""Exception hierarchy.

Each class carries an ``exit_code`` so the CLI can map failures onto the
process exit status without a lookup table.
"""


class DeltaShockError(Exception):
    exit_code = 1


class ValidationError(DeltaShockError, ValueError):
    """An input violates a documented invariant."""

    exit_code = 2


class InvalidProblem(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class ClassificationError(ValidationError):
    """Operation requested for a wave type it does not apply to."""


class SolverError(DeltaShockError, RuntimeError):
    exit_code = 3


class NonConvergence(SolverError):
    pass


class NoRoot(SolverError):
    pass


class QuadratureFailure(SolverError):
    pass


class WindowExcludesSingularity(SolverError, ValueError):
    pass


class CflViolation(SolverError):
    pass


class NoConcentration(SolverError):
    pass


class IoError(DeltaShockError, OSError):
    exit_code = 4


class DataError(IoError, ValueError):
    """Report content cannot be serialized (e.g. NaN measurements)."""
