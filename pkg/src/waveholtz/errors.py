"""Exception types raised by the package.

Every error derives from :class:`WaveHoltzError` and also from the builtin
exception that best describes it, so callers can catch either.
"""


class WaveHoltzError(Exception):
    """Base class for all package errors."""


class InvalidGridError(WaveHoltzError, ValueError):
    """Grid has too few nodes or a degenerate extent."""


class InvalidFieldError(WaveHoltzError, ValueError):
    """Wave speed samples are non-positive or have the wrong shape."""


class BoundaryError(WaveHoltzError, ValueError):
    """Boundary specification is inconsistent or unsupported here."""


class SizeError(WaveHoltzError, ValueError):
    """Problem too large for a dense routine."""


class ShapeError(WaveHoltzError, ValueError):
    """Array length does not match the discretization."""


class ExtensionError(WaveHoltzError, ValueError):
    """Problem cannot be rewritten on an extended Neumann domain."""


class ParameterError(WaveHoltzError, ValueError):
    """A scalar parameter is outside its admissible range."""


class InstabilityError(WaveHoltzError, FloatingPointError):
    """Time stepping produced non-finite values."""


class FilterSingularityError(WaveHoltzError, ZeroDivisionError):
    """Corrected filter weights hit a near-zero denominator."""


class OperatorError(WaveHoltzError, ValueError):
    """Operator lacks a structural property such as symmetry."""


class IndefiniteOperatorError(OperatorError):
    """Operator handed to CG is not symmetric positive definite."""


class BreakdownError(WaveHoltzError, ArithmeticError):
    """Krylov process broke down before reaching the tolerance."""


class ResonanceError(WaveHoltzError, ArithmeticError):
    """Shifted Helmholtz matrix is numerically singular."""


class ConvergenceError(WaveHoltzError, ArithmeticError):
    """A scalar root finder failed to meet its residual target."""


class MisuseError(WaveHoltzError, ValueError):
    """Routine called on a problem it does not apply to."""


class ConfigError(WaveHoltzError, ValueError):
    """Experiment configuration is missing or malformed."""
