"""Input validation helpers.

All public entry points funnel their array arguments through these
checks so that shape and finiteness violations surface as package
errors instead of raw numpy exceptions deep inside a computation.
"""

import numpy as np

from .errors import ConfigError, ShapeError

__all__ = [
    "as_complex_matrix",
    "as_real_matrix",
    "as_real_vector",
    "check_same_rows",
    "check_positive_int",
]


def as_complex_matrix(a, name="matrix"):
    """Coerce ``a`` to a 2-D complex128 array with finite entries.

    Parameters
    ----------
    a : array_like
        Anything convertible to a two dimensional numpy array.
    name : str
        Identifier used in error messages.

    Returns
    -------
    np.ndarray
        The validated array (a view when no conversion was needed).
    """
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_real_matrix(a, name="matrix"):
    """Coerce ``a`` to a 2-D float64 array with finite entries."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_real_vector(a, name="vector"):
    """Coerce ``a`` to a 1-D float64 array with finite entries."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_same_rows(a, expected, name="matrix"):
    if a.shape[0] != expected:
        raise ShapeError(f"{name} has {a.shape[0]} rows, expected {expected}")


def check_positive_int(value, name):
    if not isinstance(value, (int, np.integer)) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
