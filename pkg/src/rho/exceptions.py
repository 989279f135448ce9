"""Exception types shared across the package."""


class RhoError(Exception):
    """Base class for every error this package raises deliberately."""


class InputError(RhoError, ValueError):
    """Invalid argument or malformed input data."""


class CapExceededError(RhoError):
    """A dense-path operation was asked to exceed its configured size cap."""


class UndefinedMetricError(RhoError):
    """A ranking metric is undefined for the given label distribution."""


class GenerationError(RhoError):
    """Synthetic data generation could not satisfy its targets."""


class DivergenceError(RhoError):
    """Training produced a non-finite loss and was aborted."""


class NonFiniteError(RhoError):
    """A tensor in the computation graph contains NaN or infinity."""
