"""Local artifacts painted onto the image: stain deposits, air bubbles,
dermatoscope black corners and camera-overlay characters.

Every overlay changes pixels only inside a region that can be recomputed from
the geometry helpers below, which consume the rng stream in exactly the same
order as the kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ApplicabilityError, ImageBuffer, RngStream, to_bytes, to_float
from ._util import require, require_finite, require_int
from .font import ALPHABET, GLYPH_HEIGHT, GLYPH_WIDTH, glyph_mask

STAIN_COLOR = np.array([0.30, 0.15, 0.45], dtype=np.float32)  # hematoxylin-like violet
STAIN_OPACITY = 0.75
STAIN_FALLOFF = 2.5
STAIN_MIN_ASPECT = 0.6

BUBBLE_OPACITY = 0.85
BUBBLE_BRIGHTEN = 1.15
BUBBLE_RIM_DARKEN = 0.80
BUBBLE_RIM_WIDTH = 0.15

CORNER_FALLOFF = 0.04


@dataclass(frozen=True)
class Ellipse:
    cy: float
    cx: float
    a: float
    b: float
    theta: float

    def rho2(self, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
        """Squared normalized elliptical radius of pixel centres (< 1 means inside)."""
        dy, dx = yy - self.cy, xx - self.cx
        c, s = math.cos(self.theta), math.sin(self.theta)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (u / self.a) ** 2 + (v / self.b) ** 2

    def bbox(self, h: int, w: int) -> tuple[slice, slice]:
        r = self.a
        y0, y1 = max(0, int(math.floor(self.cy - r))), min(h, int(math.ceil(self.cy + r)) + 1)
        x0, x1 = max(0, int(math.floor(self.cx - r))), min(w, int(math.ceil(self.cx + r)) + 1)
        return slice(y0, y1), slice(x0, x1)


@dataclass(frozen=True)
class GlyphBox:
    char: str
    y: int
    x: int
    scale: int
    white: bool

    @property
    def height(self) -> int:
        return GLYPH_HEIGHT * self.scale

    @property
    def width(self) -> int:
        return GLYPH_WIDTH * self.scale


def _size_range(min_radius, max_radius) -> tuple[float, float]:
    lo, hi = require_finite("min_radius", min_radius), require_finite("max_radius", max_radius)
    require(0 < lo <= hi, f"radius range must satisfy 0 < min <= max, got ({lo}, {hi})")
    return lo, hi


def stain_geometry(shape, count: int, size_range, rng: RngStream) -> list[Ellipse]:
    """Draw ``count`` ellipses; each consumes five uniforms (cx, cy, size, aspect, angle)."""
    h, w = shape[:2]
    lo, hi = _size_range(*size_range)
    out = []
    for _ in range(count):
        cx, cy, size, aspect, theta = rng.uniform(size=5)
        a = lo + size * (hi - lo)
        b = a * (STAIN_MIN_ASPECT + aspect * (1 - STAIN_MIN_ASPECT))
        out.append(Ellipse(cy * h, cx * w, a, b, theta * math.pi))
    return out


def bubble_geometry(shape, count: int, size_range, rng: RngStream) -> list[Ellipse]:
    """Draw ``count`` circles; each consumes three uniforms (cx, cy, size)."""
    h, w = shape[:2]
    lo, hi = _size_range(*size_range)
    out = []
    for _ in range(count):
        cx, cy, size = rng.uniform(size=3)
        r = lo + size * (hi - lo)
        out.append(Ellipse(cy * h, cx * w, r, r, 0.0))
    return out


def _check_count(count) -> int:
    count = require_int("count", count)
    require(count >= 0, f"count must be >= 0, got {count}")
    return count


def _require_rgb(img: ImageBuffer, name: str) -> None:
    if img.channels != 3:
        raise ApplicabilityError(f"{name} needs a 3-channel image")


def overlay_stain(img: ImageBuffer, count: int, size_range, rng: RngStream) -> ImageBuffer:
    """Alpha-blend ``count`` soft-edged violet ellipses onto an RGB image.

    Opacity follows a Gaussian falloff in the normalized radius, shifted so it
    reaches exactly zero on the ellipse boundary.
    """
    _require_rgb(img, "stain_deposit")
    count = _check_count(count)
    if count == 0:
        return img
    x = to_float(img)
    h, w, _ = x.shape
    floor = math.exp(-STAIN_FALLOFF)
    for e in stain_geometry(x.shape, count, size_range, rng):
        sy, sx = e.bbox(h, w)
        yy, xx = np.mgrid[sy, sx]
        rho2 = e.rho2(yy.astype(np.float64), xx.astype(np.float64))
        alpha = np.where(rho2 < 1.0, (np.exp(-STAIN_FALLOFF * rho2) - floor) / (1 - floor), 0.0)
        alpha = (STAIN_OPACITY * alpha)[:, :, None].astype(np.float32)
        patch = x[sy, sx]
        x[sy, sx] = patch * (1 - alpha) + STAIN_COLOR * alpha
    return to_bytes(x)


def overlay_bubble(img: ImageBuffer, count: int, size_range, rng: RngStream) -> ImageBuffer:
    """Blend ``count`` air bubbles: brightened interior, darkened rim ring."""
    _require_rgb(img, "bubble")
    count = _check_count(count)
    if count == 0:
        return img
    x = to_float(img)
    h, w, _ = x.shape
    for e in bubble_geometry(x.shape, count, size_range, rng):
        sy, sx = e.bbox(h, w)
        yy, xx = np.mgrid[sy, sx]
        rho = np.sqrt(e.rho2(yy.astype(np.float64), xx.astype(np.float64)))[:, :, None]
        patch = x[sy, sx]
        target = np.where(rho < 1.0 - BUBBLE_RIM_WIDTH, np.clip(patch * BUBBLE_BRIGHTEN, 0, 1), patch * BUBBLE_RIM_DARKEN)
        alpha = np.where(rho < 1.0, BUBBLE_OPACITY, 0.0).astype(np.float32)
        x[sy, sx] = patch * (1 - alpha) + target * alpha
    return to_bytes(x)


def corner_weight(shape, radius_fraction: float) -> np.ndarray:
    """Per-pixel darkening weight in [0, 1]; zero on and inside the circle."""
    h, w = shape[:2]
    half_diag = 0.5 * math.hypot(h, w)
    r = radius_fraction * half_diag
    band = CORNER_FALLOFF * half_diag
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    d = np.hypot(yy - (h - 1) / 2.0, xx - (w - 1) / 2.0)
    t = np.clip((d - r) / band, 0.0, 1.0)
    return t * t * (3 - 2 * t)


def black_corner(img: ImageBuffer, radius_fraction: float) -> ImageBuffer:
    """Blacken everything outside a centred circle of ``radius_fraction`` times the half-diagonal."""
    f = require_finite("radius_fraction", radius_fraction)
    require(0 < f <= 1, f"radius_fraction must be in (0, 1], got {f}")
    wgt = corner_weight(img.shape, f)
    if not wgt.any():
        return img
    x = to_float(img)
    return to_bytes(x * (1 - wgt[:, :, None]))


def character_layout(shape, count: int, scale: int, rng: RngStream) -> list[GlyphBox]:
    """Draw ``count`` glyph placements; each consumes four integers (char, colour, y, x)."""
    h, w = shape[:2]
    gh, gw = GLYPH_HEIGHT * scale, GLYPH_WIDTH * scale
    require(gh <= h and gw <= w, f"glyph of {gh}x{gw} does not fit a {h}x{w} image")
    out = []
    for _ in range(count):
        ch = ALPHABET[int(rng.integers(0, len(ALPHABET)))]
        white = bool(rng.integers(0, 2))
        y = int(rng.integers(0, h - gh + 1))
        x = int(rng.integers(0, w - gw + 1))
        out.append(GlyphBox(ch, y, x, scale, white))
    return out


def overlay_characters(img: ImageBuffer, count: int, glyph_scale: int, rng: RngStream) -> ImageBuffer:
    """Stamp ``count`` opaque white or black glyphs at random positions."""
    count = _check_count(count)
    scale = require_int("glyph_scale", glyph_scale)
    require(scale >= 1, f"glyph_scale must be >= 1, got {scale}")
    if count == 0:
        return img
    data = np.array(img.data)
    for g in character_layout(data.shape, count, scale, rng):
        mask = glyph_mask(g.char, g.scale)
        region = data[g.y : g.y + g.height, g.x : g.x + g.width]
        region[mask] = 255 if g.white else 0
    return ImageBuffer(data)
