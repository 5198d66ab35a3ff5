"""Shared exception types."""


class CapacityError(Exception):
    """A requested computation exceeds a configured size limit."""


class SolverConvergenceError(Exception):
    """An iterative eigensolver failed to converge.

    Carries whatever diagnostics the solver produced so callers can report
    them instead of silently retrying.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
