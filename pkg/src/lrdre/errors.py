"""Exception types raised by the solver."""


class LrdreError(Exception):
    """Base class for all solver errors."""


class DimensionError(LrdreError, ValueError):
    """Operands have incompatible shapes."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class KrylovError(LrdreError):
    """Arnoldi exponential action failed to reach its tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


class StepSizeError(LrdreError):
    """Adaptive driver gave up; ``trajectory`` holds the accepted part."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class OracleCapError(LrdreError, ValueError):
    """Dense reference requested above its size cap."""


class OracleError(LrdreError):
    """Dense reference integration failed."""
