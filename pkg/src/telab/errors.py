"""Shared exception types."""


class ValidationError(ValueError):
    """An input document or argument violates the schema or an invariant."""


class SolveError(RuntimeError):
    """A solver returned a non-optimal status where an optimum was required."""
