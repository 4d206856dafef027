"""Exception hierarchy shared by all klmcnot modules."""


class ValidationError(ValueError):
    """Input violates a documented precondition or type invariant."""


class GridMismatchError(ValidationError):
    pass


class EmptyWindowError(ValidationError):
    pass


class OutOfRangeError(ValidationError):
    pass


class ResolutionError(ValidationError):
    pass


class DegenerateStateError(ValidationError):
    pass


class IncompleteScheduleError(ValidationError):
    """Measurement schedule does not span the two-qubit operator space."""


class OracleMismatchError(RuntimeError):
    """Analytic and Fock-space results disagree beyond tolerance."""


class InvariantViolation(AssertionError):
    """Internal consistency failure; indicates a bug, never bad input."""
