"""Input checks shared by the estimator wrappers."""
import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length, column_or_1d

from .errors import DataError


def check_images(X, *, as_uint8=True):
    """Coerce ``X`` to an (N, H, W, C) array.

    A 3-D input is read as a stack of single-channel images. With
    ``as_uint8`` the values must already be integral pixels in [0, 255].
    """
    X = check_array(X, allow_nd=True, dtype=None, ensure_2d=False, ensure_all_finite=True)
    if X.ndim == 3:
        X = X[..., None]
    if X.ndim != 4:
        raise DataError(f"expected images shaped (N, H, W[, C]), got {X.shape}")
    if as_uint8 and X.dtype != np.uint8:
        if X.size and (X.min() < 0 or X.max() > 255 or not np.array_equal(X, np.round(X))):
            raise DataError("pixel values must be integers in [0, 255]")
        X = X.astype(np.uint8)
    return X


def check_images_labels(X, y):
    X = check_images(X)
    y = column_or_1d(y, warn=True)
    check_consistent_length(X, y)
    if y.size and (not np.issubdtype(y.dtype, np.integer)):
        if not np.array_equal(y, np.round(y)):
            raise DataError("labels must be integers")
    return X, y.astype(np.int64)
