"""Input checks for ragged feature collections.

Utterances have different lengths, so ``X`` is a sequence of (T_i, F)
matrices rather than one 2-D array and sklearn's ``check_array`` does not
apply directly.
"""
from __future__ import annotations

import numpy as np

_LABEL_NAMES = {"bonafide": 0, "bona_fide": 0, "spoof": 1, "spoofed": 1}


def check_feature_list(X, n_channels: int | None = None) -> list[np.ndarray]:
    if isinstance(X, np.ndarray) and X.ndim == 2:
        raise ValueError("X must be a sequence of (T, F) matrices; wrap a single utterance in a list")
    try:
        items = list(X)
    except TypeError:
        raise TypeError(f"X must be a sequence of (T, F) matrices, got {type(X).__name__}") from None
    if not items:
        raise ValueError("X is empty")
    out = []
    for i, x in enumerate(items):
        a = np.asarray(x, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1:
            raise ValueError(f"X[{i}]: expected a (T, F) matrix with T >= 1, got shape {a.shape}")
        if n_channels is not None and a.shape[1] != n_channels:
            raise ValueError(f"X[{i}]: expected {n_channels} feature channels, got {a.shape[1]}")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"X[{i}]: contains NaN or inf")
        out.append(a)
    return out


def check_binary_labels(y, n_samples: int) -> np.ndarray:
    """0 for bona fide, 1 for spoof; also accepts bools and class names."""
    items = list(y)
    if len(items) != n_samples:
        raise ValueError(f"got {n_samples} samples but {len(items)} labels")
    out = np.empty(n_samples, dtype=int)
    for i, v in enumerate(items):
        if isinstance(v, str):
            if v not in _LABEL_NAMES:
                raise ValueError(f"y[{i}]: unknown label {v!r}")
            out[i] = _LABEL_NAMES[v]
        elif v in (0, 1):
            out[i] = int(v)
        else:
            raise ValueError(f"y[{i}]: labels must be 0/1, got {v!r}")
    return out
