"""Exception types raised across the package."""


class PulseCascadeError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(PulseCascadeError, ValueError):
    pass


class SpaceMismatchError(PulseCascadeError, ValueError):
    pass


class TruncationError(PulseCascadeError, ValueError):
    """Raised when a state does not fit in the declared Fock cutoff."""


class ModeError(PulseCascadeError, ValueError):
    """Invalid temporal modes (non-orthogonal, unnormalized, bad grid)."""


class NetworkError(PulseCascadeError, ValueError):
    """Inconsistent cascade network description."""


class NumericalInstabilityError(PulseCascadeError, RuntimeError):
    """Integration produced non-finite values.

    Attributes
    ----------
    time : float
        Time at which the instability was detected.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConfigError(PulseCascadeError, ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
