"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DimensionMismatchError


def check_texts(X) -> list[str]:
    """Accept any iterable of str (list, tuple, 1-D array, Series)."""
    if isinstance(X, str):
        raise TypeError("expected a sequence of strings, got a single string")
    texts = list(X)
    for i, t in enumerate(texts):
        if not isinstance(t, str):
            raise TypeError(f"element {i} is {type(t).__name__}, expected str")
    return texts


def check_labels(y, n: int) -> np.ndarray:
    labels = np.asarray(list(y), dtype=object).astype(str)
    if labels.ndim != 1 or len(labels) != n:
        raise ValueError(f"got {len(labels)} labels for {n} samples")
    return labels


def check_embeddings(X, dim: int) -> np.ndarray:
    """2-D finite float64 array with exactly ``dim`` columns."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != dim:
        raise DimensionMismatchError(f"expected vectors of length {dim}, got shape {X.shape}")
    return check_array(X, dtype=np.float64, ensure_min_samples=0)
