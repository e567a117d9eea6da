"""Exception types shared across the package."""


class GplfmError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(GplfmError, ValueError):
    """Matrix or vector dimensions are incompatible or non-square."""


class ValidationError(GplfmError, ValueError):
    """Argument values are invalid (non-positive parameters, bad grids, ...)."""


class StabilityError(GplfmError):
    """A matrix required to be Hurwitz has eigenvalues with nonnegative real part."""


class ConditioningError(GplfmError):
    """A factorization or linear solve failed numerically.

    ``step`` identifies the offending time step when raised inside a
    filtering recursion, else it is None.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class ConfigurationError(GplfmError, ValueError):
    """Model, estimator or run configuration is inconsistent."""


class DegeneracyError(GplfmError):
    """The selected method degenerates on this scenario (e.g. DKF with zero feedthrough)."""


class UnsupportedKernelError(GplfmError, ValueError):
    """Requested covariance family or smoothness order is not available."""
