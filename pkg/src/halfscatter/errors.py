"""Exception types raised by the library."""


class HalfScatterError(Exception):
    """Base class for all library errors."""


class InvalidModelError(HalfScatterError, ValueError):
    """Model parameters violate the basic invariants (period, potential, angle)."""


class BoundaryPointError(HalfScatterError, ValueError):
    """A real spectral parameter was given where an off-axis one is required."""


class ThresholdError(HalfScatterError, ValueError):
    """The energy coincides with a threshold; use the expansion routines instead."""


class SingularMatrixError(HalfScatterError, ArithmeticError):
    """A matrix that should be inverted is numerically singular.

    At a real energy this signals an eigenvalue of the fibered operator.
    """


class EntryPointError(HalfScatterError, ValueError):
    """A routine was called at an energy it does not handle."""


class PreconditionError(HalfScatterError, ValueError):
    """The hypotheses of the inversion formula are not satisfied."""


class RadiusError(HalfScatterError, ValueError):
    """The expansion parameter lies outside the admissible quarter disc."""


class InvalidRunError(HalfScatterError, RuntimeError):
    """An oracle computation was under-resolved; the message carries diagnostics."""


class ConfigError(HalfScatterError, ValueError):
    """The configuration file is malformed."""
