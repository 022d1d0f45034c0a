"""Intensity and colour adjustments: brightness, contrast, saturation, gamma."""

from __future__ import annotations

import numpy as np
from ..core import ApplicabilityError, ImageBuffer, ParameterError, to_bytes, to_float
from ._util import require, require_finite

COLOR_KINDS = ("brightness+", "brightness-", "contrast+", "contrast-", "saturate", "gamma+", "gamma-")


def adjust_color(img: ImageBuffer, kind: str, params: dict) -> ImageBuffer:
    """Deterministic colour transform.

    brightness scales samples by ``intensity``; contrast stretches each channel
    around its own image mean by ``factor``; saturate scales HSV saturation;
    gamma maps ``x -> x ** gamma`` (gamma < 1 brightens).  The ``+``/``-``
    suffix constrains the direction; the neutral value 1 is accepted by both.
    """
    x = to_float(img)
    if kind.startswith("brightness"):
        i = require_finite("intensity", params["intensity"])
        require(i > 0, f"intensity must be > 0, got {i}")
        _check_direction(kind, i, brighter_above_one=True)
        out = x * np.float32(i)
    elif kind.startswith("contrast"):
        c = require_finite("factor", params["factor"])
        require(c >= 0, f"contrast factor must be >= 0, got {c}")
        _check_direction(kind, c, brighter_above_one=True)
        mean = x.mean(axis=(0, 1), keepdims=True, dtype=np.float64)
        out = (x - mean) * c + mean
    elif kind == "saturate":
        if img.channels != 3:
            raise ApplicabilityError("saturate needs a 3-channel image")
        f = require_finite("factor", params["factor"])
        require(f >= 0, f"saturation factor must be >= 0, got {f}")
        out = scale_saturation(x, f)
    elif kind.startswith("gamma"):
        g = require_finite("gamma", params["gamma"])
        require(g > 0, f"gamma must be > 0, got {g}")
        # gamma+ brightens, which needs an exponent below one
        _check_direction(kind, g, brighter_above_one=False)
        out = np.power(x, np.float32(g))
    else:
        raise ParameterError(f"unknown colour kind {kind!r}; expected one of {COLOR_KINDS}")
    return to_bytes(out)


def scale_saturation(x: np.ndarray, factor: float) -> np.ndarray:
    """Multiply HSV saturation by ``factor`` (clipped at 1), keeping hue and value.

    Every HSV channel satisfies ``c = V * (1 - S * g(H))``, so with hue and
    value fixed ``V - c`` scales linearly with S and no colour-space round
    trip is needed.
    """
    v = x.max(axis=2, keepdims=True)
    s = np.divide(v - x.min(axis=2, keepdims=True), v, out=np.zeros_like(v), where=v > 0)
    ratio = np.where(s > 0, np.minimum(np.float32(factor), 1.0 / np.maximum(s, 1e-12)), 1.0)
    return v - (v - x) * ratio


def _check_direction(kind: str, value: float, brighter_above_one: bool) -> None:
    if kind[-1] not in "+-":
        raise ParameterError(f"unknown colour kind {kind!r}; expected one of {COLOR_KINDS}")
    up = (kind[-1] == "+") == brighter_above_one
    if up and value < 1 or not up and value > 1:
        raise ParameterError(f"{kind} value {value} points the wrong way")
