"""Exception types shared across the package."""


class LatticeTomoError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(LatticeTomoError, ValueError):
    """A physical parameter or state violates its documented constraints."""


class ConfigError(LatticeTomoError, ValueError):
    """A run configuration could not be parsed or validated."""


class NumericalError(LatticeTomoError, RuntimeError):
    """A numerical routine failed to converge or produced invalid output."""


class QuadratureError(NumericalError):
    """Successive quadrature refinements disagree beyond tolerance."""


class FitError(NumericalError):
    """A nonlinear fit did not converge; carries the final residual norm."""

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm
