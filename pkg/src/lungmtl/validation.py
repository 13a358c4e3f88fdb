"""Small input-validation helpers used by the estimator classes."""

import numpy as np

from .errors import ShapeMismatchError, UnfittedModelError


def as_float_array(X, ndim=2, dtype=np.float64, name="X"):
    """Coerce to a float ndarray of the given rank; reject NaN/Inf."""
    arr = np.asarray(X, dtype=dtype)
    if arr.ndim != ndim:
        raise ShapeMismatchError(
            f"{name} must be {ndim}-D, got shape {arr.shape}"
        )
    if arr.size and not np.all(np.isfinite(arr)):
        raise ShapeMismatchError(f"{name} contains non-finite values")
    return arr


def as_label_array(y, n=None, name="y"):
    """Coerce to a 1-D int label array, optionally checking its length."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ShapeMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ShapeMismatchError(
            f"{name} has {arr.shape[0]} entries, expected {n}"
        )
    return arr.astype(np.int64)


def check_fitted(estimator, attr):
    """Raise UnfittedModelError unless ``estimator`` carries ``attr``."""
    if getattr(estimator, attr, None) is None:
        raise UnfittedModelError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )
