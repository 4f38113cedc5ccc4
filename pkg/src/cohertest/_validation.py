"""Input validation helpers.

``sklearn.utils.check_array`` refuses complex input, so panels are
validated here instead.
"""
import numbers

import numpy as np

from .errors import ParameterError, ShapeError


def check_panel(X, *, min_channels=1, min_samples=1, name="panel"):
    """Return ``X`` as a C-contiguous complex128 array of shape (M, N)."""
    try:
        arr = np.asarray(X)
    except Exception as exc:  # pragma: no cover - exotic inputs
        raise ShapeError(f"{name}: cannot convert to array ({exc})") from exc
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ShapeError(f"{name}: expected a 2-D array, got ndim={arr.ndim}")
    if not (np.issubdtype(arr.dtype, np.number) or arr.dtype == bool):
        raise ShapeError(f"{name}: non-numeric dtype {arr.dtype}")
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    m, n = arr.shape
    if m < min_channels or n < min_samples:
        raise ShapeError(
            f"{name}: shape {arr.shape} needs at least {min_channels} channels "
            f"and {min_samples} samples"
        )
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name}: contains non-finite values")
    return arr


def check_int(value, name, *, low=None, high=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if low is not None and value < low:
        raise ParameterError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ParameterError(f"{name} must be <= {high}, got {value}")
    return value


def check_real(value, name, *, low=None, high=None, low_open=False, high_open=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ParameterError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value}")
    if low is not None and (value < low or (low_open and value == low)):
        raise ParameterError(f"{name}={value} below admissible range")
    if high is not None and (value > high or (high_open and value == high)):
        raise ParameterError(f"{name}={value} above admissible range")
    return value


def check_choice(value, name, choices):
    if value not in choices:
        raise ParameterError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value


def floor_power(n, exponent):
    """``floor(n ** exponent)`` robust to rounding at exact integer roots.

    ``1000 ** (2/3)`` evaluates to 99.99999999999997 in floating point; the
    intended value is 100.
    """
    x = float(n) ** float(exponent)
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return int(np.floor(x))


def floor_ratio(a, b):
    """``floor(a / b)`` robust to representation error in ``b``."""
    x = float(a) / float(b)
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return int(np.floor(x))
