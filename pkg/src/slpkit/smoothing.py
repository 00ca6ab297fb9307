"""Savitzky-Golay smoothing for daily profiles.

The filter fits a polynomial to each sliding window by least squares and
replaces the centre sample with the fit's value there. Daily profiles wrap
at midnight, so the boundary is circular.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError


def savgol_coeffs(window: int, polyorder: int) -> np.ndarray:
    """Convolution weights of the centre-evaluated least-squares fit.

    The weights sum to 1 and reproduce any polynomial up to `polyorder`
    exactly.
    """
    if window % 2 == 0 or window < 1:
        raise ConfigError(f"window must be odd and positive, got {window}")
    if polyorder >= window:
        raise ConfigError(f"polyorder {polyorder} must be smaller than window {window}")
    if polyorder < 0:
        raise ConfigError("polyorder must be >= 0")
    half = window // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    design = offsets[:, None] ** np.arange(polyorder + 1)[None, :]
    # centre value of the fitted polynomial = first row of the pseudoinverse
    return np.linalg.pinv(design)[0]


def savgol_smooth(profile: np.ndarray, window: int = 11, polyorder: int = 3) -> np.ndarray:
    """Smooth a daily profile with circular boundary handling."""
    y = np.asarray(profile, dtype=float)
    if y.ndim != 1:
        raise ConfigError("profile must be one-dimensional")
    if window > y.size:
        raise ConfigError(f"window {window} exceeds profile length {y.size}")
    weights = savgol_coeffs(window, polyorder)
    half = window // 2
    padded = np.concatenate([y[-half:], y, y[:half]])
    return np.correlate(padded, weights, mode="valid")
