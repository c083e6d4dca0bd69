"""Exception hierarchy shared across the package."""


class NostraError(Exception):
    """Base class for all package errors."""


class DimensionError(NostraError, ValueError):
    """Inputs have inconsistent dimensions."""


class ConditioningError(NostraError, ArithmeticError):
    """A correlation matrix could not be factorized or gave a degenerate result."""


class FitError(NostraError):
    """Every restart of a hyperparameter fit failed.

    ``diagnostics`` holds one entry per restart describing why it failed.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class ReferencePointError(NostraError, ValueError):
    """A frontier point lies outside the box bounded by the reference point."""


class ClusteringError(NostraError, ValueError):
    """Clustering request cannot be satisfied (too many clusters, empty cluster)."""


class DomainError(NostraError, ValueError):
    """An input lies outside the domain of a test problem."""


class IterationError(NostraError):
    """An optimizer iteration failed; ``diagnostics`` holds the partial state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
