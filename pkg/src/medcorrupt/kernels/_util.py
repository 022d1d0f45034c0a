from __future__ import annotations

import math

import numpy as np
from scipy import ndimage, signal

from ..core import ParameterError

# above this many taps FFT convolution beats direct convolution on 224x224 inputs
_DIRECT_MAX_TAPS = 49


def require(cond: bool, message: str) -> None:
    if not cond:
        raise ParameterError(message)


def require_finite(name: str, value) -> float:
    value = float(value)
    require(math.isfinite(value), f"{name} must be finite, got {value!r}")
    return value


def require_int(name: str, value) -> int:
    require(float(value) == int(value), f"{name} must be an integer, got {value!r}")
    return int(value)


def convolve(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Convolve every channel of an HxWxC float raster with a normalized 2-D kernel.

    Borders use reflect padding (edge sample repeated: ``d c b a | a b c d``).
    """
    kh, kw = kernel.shape
    if kh == 1 and kw == 1:
        return x * np.float32(kernel[0, 0])
    kernel = kernel.astype(np.float32)
    if kh * kw <= _DIRECT_MAX_TAPS:
        return ndimage.convolve(x, kernel[:, :, None], mode="reflect")
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((ph, kh - 1 - ph), (pw, kw - 1 - pw), (0, 0)), mode="symmetric")
    out = signal.fftconvolve(padded, kernel[:, :, None], mode="valid", axes=(0, 1))
    return out.astype(np.float32)
