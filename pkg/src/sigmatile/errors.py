"""Exception types raised across the package."""


class SigmaTileError(Exception):
    """Base class for all package errors."""


class DivergenceError(SigmaTileError):
    """The state left the blow-up bound: the rule looks unstable for this input."""

    def __init__(self, step: int, norm: float, bound: float):
        super().__init__(f"state norm {norm:.3g} exceeded {bound:.3g} at step {step}")
        self.step = step
        self.norm = norm
        self.bound = bound


class UnderSampledError(SigmaTileError):
    """Not enough samples for the requested statistic or grid."""


class MultiplicityError(SigmaTileError):
    """An operation that needs a certified single tile got something else."""


class ConnectivityError(SigmaTileError):
    """The tile is not v_m-connected."""


class OrderError(SigmaTileError):
    """The operation is only defined for a particular modulator order."""


class RationalError(SigmaTileError, ValueError):
    """Input x is rational (small denominator) where an irrational is required."""


class QuadratureError(SigmaTileError):
    """Two successive quadrature refinements disagree beyond tolerance."""


class DegenerateError(SigmaTileError, ValueError):
    """A fit cannot be made (zero values, too few points)."""


class LengthError(SigmaTileError, ValueError):
    """A sequence is too short for the requested operation."""
