"""Exception types raised by the solver library."""


class DomainError(ValueError):
    """A point or measure lies outside the box it is meant to live in."""


class CapabilityError(RuntimeError):
    """The instance lacks an oracle the caller asked for."""


class OracleError(RuntimeError):
    """An oracle returned a non-finite value.

    Attributes
    ----------
    point : ndarray or None
        The point at which the bad value was produced.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegenerateMeasureError(ValueError):
    """An operation would leave a measure with no mass."""


class SingularDesignError(ArithmeticError):
    """The information matrix of a design is singular."""


class InnerSolverError(RuntimeError):
    """The fully-corrective reweighting failed to decrease the objective."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SolverError(RuntimeError):
    """A solver run aborted; ``trace`` holds the rows produced so far."""

    def __init__(self, message, trace=None, cause=None):
        super().__init__(message)
        self.trace = trace
        self.cause = cause
