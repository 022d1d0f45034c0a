"""Gaussian, defocus (disk), motion (line) and zoom blur."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..core import ImageBuffer, ParameterError, RngStream, to_bytes, to_float
from ._util import convolve, require, require_finite

BLUR_KINDS = ("gaussian", "defocus", "motion", "zoom")
ZOOM_STEP = 0.01
_SUPERSAMPLE = 8


def disk_kernel(radius: float) -> np.ndarray:
    """Normalized disk whose taps hold the fraction of each pixel covered by the disk."""
    if radius <= 0:
        return np.ones((1, 1))
    half = int(math.ceil(radius - 0.5))
    n = 2 * half + 1
    sub = (np.arange(n * _SUPERSAMPLE) + 0.5) / _SUPERSAMPLE - half - 0.5
    yy, xx = np.meshgrid(sub, sub, indexing="ij")
    inside = (yy**2 + xx**2 <= radius**2).astype(np.float64)
    k = inside.reshape(n, _SUPERSAMPLE, n, _SUPERSAMPLE).sum(axis=(1, 3))
    return k / k.sum()


def motion_kernel(length: float, angle: float) -> np.ndarray:
    """Normalized antialiased line segment of ``length`` pixels centred on the kernel.

    ``angle`` is in radians, counter-clockwise from the +x axis.
    """
    if length <= 1:
        return np.ones((1, 1))
    half_len = (length - 1) / 2.0
    half = int(math.ceil(half_len))
    n = 2 * half + 1
    k = np.zeros((n, n))
    steps = max(2, int(math.ceil((length - 1) * _SUPERSAMPLE)) + 1)
    t = np.linspace(-half_len, half_len, steps)
    px = half + t * math.cos(angle)
    py = half - t * math.sin(angle)
    x0, y0 = np.floor(px).astype(int), np.floor(py).astype(int)
    fx, fy = px - x0, py - y0
    for dy, dx, wgt in (
        (0, 0, (1 - fy) * (1 - fx)),
        (0, 1, (1 - fy) * fx),
        (1, 0, fy * (1 - fx)),
        (1, 1, fy * fx),
    ):
        yi, xi = np.clip(y0 + dy, 0, n - 1), np.clip(x0 + dx, 0, n - 1)
        np.add.at(k, (yi, xi), wgt)
    return k / k.sum()


def zoom_factors(max_zoom: float) -> np.ndarray:
    if max_zoom <= 1.0:
        return np.ones(1)
    n = max(2, int(round((max_zoom - 1.0) / ZOOM_STEP)) + 1)
    return np.linspace(1.0, max_zoom, n)


def _zoom_taps(n: int, z: float):
    c = (n - 1) / 2.0
    pos = c + (np.arange(n) - c) / z
    i0 = np.clip(np.floor(pos).astype(np.intp), 0, n - 1)
    i1 = np.minimum(i0 + 1, n - 1)
    f = (pos - i0).astype(np.float32)
    return i0, i1, f


def _zoom_leading_axis(x: np.ndarray, z: float) -> np.ndarray:
    """Bilinear zoom by ``z`` along axis 0 about its centre, same length out."""
    i0, i1, f = _zoom_taps(x.shape[0], z)
    lo, hi = x[i0], x[i1]
    hi -= lo
    hi *= f[:, None, None]
    lo += hi
    return lo


def _center_zoom(x: np.ndarray, z: float, xt: np.ndarray | None = None) -> np.ndarray:
    """Bilinear zoom by ``z`` about the image centre, cropped back to the input size.

    ``xt`` is ``x`` with its first two axes swapped, contiguous; gathering
    along the leading axis is much faster than along axis 1.
    """
    if xt is None:
        xt = np.ascontiguousarray(x.transpose(1, 0, 2))
    cols = _zoom_leading_axis(xt, z)
    return _zoom_leading_axis(np.ascontiguousarray(cols.transpose(1, 0, 2)), z)


def blur(img: ImageBuffer, kind: str, params: dict, rng: RngStream | None = None) -> ImageBuffer:
    """Blur every channel; convolutions use reflect padding.

    motion draws its angle uniformly from [0, pi) via ``rng`` unless
    ``params["angle"]`` is given.
    """
    x = to_float(img)
    if kind == "gaussian":
        sigma = require_finite("sigma", params["sigma"])
        require(sigma >= 0, f"sigma must be >= 0, got {sigma}")
        if sigma == 0:
            return img
        out = ndimage.gaussian_filter(x, sigma=(sigma, sigma, 0), mode="reflect", truncate=4.0)
    elif kind == "defocus":
        radius = require_finite("radius", params["radius"])
        require(radius >= 0, f"radius must be >= 0, got {radius}")
        if radius == 0:
            return img
        out = convolve(x, disk_kernel(radius))
    elif kind == "motion":
        length = require_finite("length", params["length"])
        require(length >= 1, f"motion length must be >= 1, got {length}")
        if "angle" in params and params["angle"] is not None:
            angle = require_finite("angle", params["angle"])
        else:
            require(rng is not None, "motion blur needs an rng stream to draw its angle")
            angle = float(rng.uniform(0.0, math.pi))
        if length == 1:
            return img
        out = convolve(x, motion_kernel(length, angle))
    elif kind == "zoom":
        max_zoom = require_finite("max_zoom", params["max_zoom"])
        require(max_zoom >= 1, f"max_zoom must be >= 1, got {max_zoom}")
        zooms = zoom_factors(max_zoom)
        if len(zooms) == 1:
            return img
        xt = np.ascontiguousarray(x.transpose(1, 0, 2))
        acc = x.copy()
        for z in zooms[1:]:
            acc += _center_zoom(x, float(z), xt)
        out = acc / np.float32(len(zooms))
    else:
        raise ParameterError(f"unknown blur kind {kind!r}; expected one of {BLUR_KINDS}")
    return to_bytes(out)
