"""Input validation helpers shared by the estimators and functions."""

import numpy as np
from sklearn.utils.validation import check_array


class ConfigurationError(ValueError):
    """Raised for inconsistent processing parameters."""


class InputError(ValueError):
    """Raised for malformed data handed to the library."""


def check_signal(samples):
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise InputError(f"expected a 1-D signal, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise InputError("signal contains non-finite samples")
    return samples


def check_frames(frames, min_length=1):
    """Return ``frames`` as a 2-D float array of shape (n_frames, frame_len)."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 1:
        frames = frames[np.newaxis, :]
    frames = check_array(frames, ensure_min_samples=1, ensure_min_features=min_length)
    return frames


def check_symbols(symbols, name="sequence"):
    """Coerce a symbol sequence to a non-empty 1-D integer array."""
    if hasattr(symbols, "symbols"):
        symbols = symbols.symbols
    arr = np.asarray(symbols)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError(f"{name} is empty")
    if not np.issubdtype(arr.dtype, np.integer):
        if np.issubdtype(arr.dtype, np.floating) and np.all(arr == np.round(arr)):
            arr = arr.astype(np.int64)
        else:
            raise InputError(f"{name} must hold integer symbols")
    return arr.astype(np.int64, copy=False)


def check_paired(x, y):
    x = check_symbols(x, "x sequence")
    y = check_symbols(y, "y sequence")
    if x.shape[0] != y.shape[0]:
        raise InputError(f"sequence lengths differ: {x.shape[0]} != {y.shape[0]}")
    return x, y


def dense_codes(symbols):
    """Map integer symbols to 0..G-1 by sorted value; returns (codes, G)."""
    values, codes = np.unique(symbols, return_inverse=True)
    return codes.reshape(-1), values.shape[0]
