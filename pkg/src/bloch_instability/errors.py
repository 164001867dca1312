"""Exception hierarchy shared across the toolkit."""


class BlochInstabilityError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(BlochInstabilityError, ValueError):
    """Invalid operator, grid or scenario configuration."""


class DomainError(BlochInstabilityError, ValueError):
    pass


class TruncationError(ConfigurationError):
    """Fourier truncation too small to hold the coefficient bandwidth."""


class ResolutionError(BlochInstabilityError, ValueError):
    """Spatial grid too coarse: the aliasing detector tripped."""


class ShapeError(BlochInstabilityError, ValueError):
    pass


class UnsupportedOracleError(BlochInstabilityError, TypeError):
    pass


class EigensolverError(BlochInstabilityError, RuntimeError):
    def __init__(self, xi, cause=None):
        self.xi = xi
        super().__init__(f"eigensolver failed at xi={xi!r}: {cause}")


class ContourError(BlochInstabilityError, ValueError):
    """An eigenvalue sits too close to the integration contour."""

    def __init__(self, message, zeta=None):
        self.zeta = zeta
        super().__init__(message)


class GrowthOverflowError(BlochInstabilityError, OverflowError):
    pass


class DiagnosticsError(BlochInstabilityError, ValueError):
    pass


class HypothesisError(BlochInstabilityError, ValueError):
    """Growth-rate hypotheses (e.g. p*lambda_M > lambda_0) are violated."""


class EtaTooLargeError(ConfigurationError):
    pass


class DampingFailure(BlochInstabilityError, RuntimeError):
    pass


class MarginalCountWarning(UserWarning):
    """An eigenvalue lies within eps_gap of a counting threshold."""


class CrossingWarning(UserWarning):
    """A tracked branch jumps by more than the continuity threshold."""
