"""Exception types shared across the package."""


class VpmError(Exception):
    """Base class for solver-specific failures."""


class SolverError(VpmError):
    """Linear solve did not reach the requested residual.

    Carries the relative residual that was achieved when the iteration
    cap was hit.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepError(VpmError):
    """A time step failed (fixed-point divergence or singular particle update)."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class InitializationError(VpmError):
    """Particle momenta could not be fit to the requested velocity field."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MeasurementError(VpmError):
    """A diagnostic measurement is ill-posed on the given data."""


class ConfigError(ValueError):
    """Invalid configuration value or file."""
