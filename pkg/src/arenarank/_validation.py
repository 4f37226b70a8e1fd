"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length, column_or_1d


def check_pairs(X, y=None):
    """Validate battle pairs.

    ``X`` is an (n, 2) array of model ids. ``y`` holds 1 where the first
    model won; when omitted the first column is taken to be the winner.
    Returns (first, second, y) with ids as strings and y as int8.
    """
    X = check_array(X, dtype=None, ensure_2d=True, ensure_all_finite=False)
    if X.shape[1] != 2:
        raise ValueError(f"X must have two columns (model_a, model_b), got {X.shape[1]}")
    first = X[:, 0].astype(str)
    second = X[:, 1].astype(str)
    if np.any(first == second):
        row = int(np.flatnonzero(first == second)[0])
        raise ValueError(f"row {row} pits a model against itself")
    if y is None:
        y = np.ones(len(first), dtype=np.int8)
    else:
        y = column_or_1d(y, warn=True)
        check_consistent_length(first, y)
        if not np.all(np.isin(y, (0, 1))):
            raise ValueError("y must contain only 0 and 1 (ties are not supported)")
        y = y.astype(np.int8)
    return first, second, y


def check_known(ids, index: dict[str, int]) -> np.ndarray:
    try:
        return np.fromiter((index[i] for i in ids), dtype=np.int64, count=len(ids))
    except KeyError as exc:
        raise ValueError(f"model {exc.args[0]!r} was not seen during fit") from None
