"""Exception hierarchy shared by all modules."""


class AtlasError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(AtlasError, ValueError):
    """A parameter violates its documented range."""


class RejectedInputError(AtlasError, ValueError):
    """Input data (positions, samples) is malformed, e.g. non-finite."""


class SaturationError(AtlasError, OverflowError):
    """Exponentiated positions would overflow; ``mask`` flags the entries."""

    def __init__(self, message, mask=None):
        super().__init__(message)
        self.mask = mask


class IntegrationError(AtlasError, ArithmeticError):
    """The SDE integrator produced a non-finite state."""


class QuadratureError(AtlasError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class GridError(AtlasError, ValueError):
    """An estimator grid is incompatible with the simulated ensemble."""


class CholeskyError(AtlasError, ArithmeticError):
    """A covariance matrix failed to factor even after jitter escalation."""


class StatisticsError(AtlasError, ValueError):
    """A statistical routine received too little data."""
