"""Exception hierarchy shared by all svdmimo modules."""

__all__ = [
    "SvdMimoError",
    "ShapeError",
    "ConfigError",
    "NumericError",
    "DegenerateChannelError",
    "EstimationError",
    "CalibrationError",
]


class SvdMimoError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SvdMimoError, ValueError):
    """Operand dimensions are incompatible with the requested operation."""


class ConfigError(SvdMimoError, ValueError):
    """A configuration value violates a documented constraint."""


class NumericError(SvdMimoError, RuntimeError):
    """A numerical routine failed to produce a usable result.

    The optional ``detail`` attribute carries whatever diagnostic the
    backend made available (e.g. the LAPACK failure message).
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


class DegenerateChannelError(NumericError):
    """A channel realization is numerically rank deficient.

    Callers running Monte Carlo loops are expected to catch this and
    resample the channel.
    """


class EstimationError(SvdMimoError, ValueError):
    """Channel estimation received unusable pilots or hook output."""


class CalibrationError(SvdMimoError, RuntimeError):
    """No normalization convention matched the reference table.

    The ``report`` attribute holds the full per-pair deviation report
    (see :class:`svdmimo.harness.CalibrationResult`).
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
