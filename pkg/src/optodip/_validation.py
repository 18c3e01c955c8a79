"""Input checks shared by the estimator wrappers."""

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

from .exceptions import DataError


def column(X, name="X"):
    """Accept a 1-D array or a single-column 2-D array; return 1-D float."""
    X = check_array(X, ensure_2d=False, dtype=float, input_name=name)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise DataError(f"{name} must have exactly one feature, got {X.shape[1]}")
        X = X[:, 0]
    return X


def xy(X, y):
    x = column(X)
    y = column(y, "y")
    check_consistent_length(x, y)
    return x, y


def positive_weights(sample_weight, n):
    if sample_weight is None:
        return None
    w = column(sample_weight, "sample_weight")
    check_consistent_length(w, np.empty(n))
    if np.any(~(w > 0)):
        raise DataError("sample_weight must be strictly positive")
    return w
