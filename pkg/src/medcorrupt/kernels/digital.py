"""Digital corruptions: lossy JPEG round trip and pixelation."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from ..core import ImageBuffer, to_bytes, to_float
from ._util import require, require_int


def _to_pil(img: ImageBuffer) -> Image.Image:
    if img.channels == 1:
        return Image.fromarray(img.data[:, :, 0], mode="L")
    return Image.fromarray(img.data, mode="RGB")


def jpeg_compress(img: ImageBuffer, quality: int) -> ImageBuffer:
    """Encode to JPEG at ``quality`` and decode again, entirely in memory."""
    quality = require_int("quality", quality)
    require(1 <= quality <= 100, f"JPEG quality must be in [1, 100], got {quality}")
    buf = io.BytesIO()
    _to_pil(img).save(buf, format="JPEG", quality=quality, optimize=False)
    buf.seek(0)
    with Image.open(buf) as decoded:
        arr = np.asarray(decoded.convert("L" if img.channels == 1 else "RGB"))
    return ImageBuffer(arr)


def box_resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Area-averaging matrix mapping ``n_in`` samples onto ``n_out`` (n_out <= n_in).

    Row ``j`` holds the overlap of output cell ``[j, j+1) * n_in/n_out`` with
    each input cell, normalized to sum to one.
    """
    scale = n_in / n_out
    edges = np.arange(n_out + 1) * scale
    lo, hi = edges[:-1, None], edges[1:, None]
    cells = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, cells + 1) - np.maximum(lo, cells), 0.0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def nearest_index(n_small: int, n_big: int) -> np.ndarray:
    """Source index in a length-``n_small`` axis for each of ``n_big`` output samples."""
    idx = np.floor((np.arange(n_big) + 0.5) * n_small / n_big).astype(np.intp)
    return np.minimum(idx, n_small - 1)


def pixelate(img: ImageBuffer, factor: float) -> ImageBuffer:
    """Box-filter downscale by ``factor`` then nearest-neighbour upscale to the original size."""
    factor = float(factor)
    require(0.0 < factor <= 1.0, f"pixelate factor must be in (0, 1], got {factor}")
    h, w = img.height, img.width
    require(factor * min(h, w) >= 1.0 - 1e-9, f"factor {factor} collapses a {h}x{w} image below one pixel")
    sh, sw = max(1, int(round(h * factor))), max(1, int(round(w * factor)))
    if (sh, sw) == (h, w):
        return img
    x = to_float(img).astype(np.float64)
    small = np.einsum("ih,hwc,jw->ijc", box_resample_matrix(h, sh), x, box_resample_matrix(w, sw), optimize=True)
    big = small[nearest_index(sh, h)][:, nearest_index(sw, w)]
    return to_bytes(big)
