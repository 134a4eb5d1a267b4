import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionMismatch


def check_points(X, dim=None):
    """Return ``X`` as a finite float64 ``(n, d)`` array; a 1-D input becomes one row.

    The second value tells whether the input was a single point.
    """
    arr = np.asarray(X, dtype=np.float64)
    single = arr.ndim == 1
    arr = check_array(arr.reshape(1, -1) if single else arr, dtype=np.float64)
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatch(f"expected {dim} features, got {arr.shape[1]}")
    return arr, single


def check_vector(x, dim=None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DimensionMismatch(f"expected length {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector contains NaN or Inf")
    return x
