"""Additive, multiplicative, impulse and photon shot noise."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import stats

from ..core import ImageBuffer, ParameterError, RngStream, to_bytes, to_float
from ._util import require, require_finite

NOISE_KINDS = ("gaussian", "speckle", "impulse", "shot")

# above this photon scale the per-level CDF tables get too large; use numpy's sampler
_TABLE_MAX_PHOTONS = 1000.0


@lru_cache(maxsize=32)
def _poisson_tables(photons: float) -> tuple[np.ndarray, np.ndarray]:
    """CDF and guide tables of Poisson(v / 255 * photons) for v = 0..255.

    ``guide[v, j]`` is the smallest k with ``cdf[v, k] >= j / G``, so a
    uniform u needs only a short forward walk from ``guide[v, floor(u * G)]``.
    """
    k_max = int(np.ceil(photons + 12.0 * np.sqrt(photons) + 12.0))
    mu = np.arange(256)[:, None] / 255.0 * photons
    cdf = stats.poisson.cdf(np.arange(k_max + 1)[None, :], mu)
    cdf[:, -1] = 1.0
    g = k_max + 1
    thresholds = np.arange(g) / g
    guide = np.stack([np.searchsorted(row, thresholds, side="left") for row in cdf])
    cdf.setflags(write=False)
    guide.setflags(write=False)
    return cdf, guide


def poisson_levels(levels: np.ndarray, photons: float, rng: RngStream) -> np.ndarray:
    """Exact Poisson draws with mean ``levels / 255 * photons`` for 8-bit ``levels``.

    Inverts the CDF (indexed search) with one uniform per sample; photon
    scales above ``_TABLE_MAX_PHOTONS`` fall back to numpy's
    transformed-rejection sampler.
    """
    if photons > _TABLE_MAX_PHOTONS:
        return rng.poisson(levels.astype(np.float64) / 255.0 * photons)
    cdf, guide = _poisson_tables(float(photons))
    g = guide.shape[1]
    v = levels.astype(np.intp).ravel()
    u = rng.uniform(size=v.shape)
    k = guide[v, np.minimum((u * g).astype(np.intp), g - 1)]
    active = np.flatnonzero(cdf[v, k] < u)
    while active.size:
        k[active] += 1
        active = active[cdf[v[active], k[active]] < u[active]]
    return k.reshape(levels.shape)


def add_noise(img: ImageBuffer, kind: str, params: dict, rng: RngStream) -> ImageBuffer:
    """Apply one noise model; every result is clamped to [0, 1] before quantization.

    gaussian: ``x + n``; speckle: ``x + x * n`` with ``n ~ N(0, sigma^2)`` per sample.
    impulse: ``round(amount * H * W)`` pixel locations forced to black or white.
    shot: ``Poisson(x * photons) / photons``.
    """
    x = to_float(img)
    if kind in ("gaussian", "speckle"):
        sigma = require_finite("sigma", params["sigma"])
        require(sigma >= 0.0, f"sigma must be >= 0, got {sigma}")
        n = rng.normal(0.0, sigma, size=x.shape).astype(np.float32)
        out = x + n if kind == "gaussian" else x + x * n
    elif kind == "impulse":
        amount = require_finite("amount", params["amount"])
        require(0.0 <= amount <= 1.0, f"impulse amount must be in [0, 1], got {amount}")
        h, w, _ = x.shape
        k = int(round(amount * h * w))
        out = x
        if k:
            flat = out.reshape(h * w, -1)
            where = rng.generator.choice(h * w, size=k, replace=False)
            flat[where] = rng.integers(0, 2, size=(k, 1)).astype(np.float32)
    elif kind == "shot":
        photons = require_finite("photons", params["photons"])
        require(photons > 0.0, f"photon scale must be > 0, got {photons}")
        out = poisson_levels(img.data, photons, rng) / photons
    else:
        raise ParameterError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
    return to_bytes(out)
