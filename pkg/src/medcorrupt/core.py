"""Domain types shared by every module: images, severities, categories, RNG streams.

Pixel convention: images are stored as 8-bit samples and processed as float32
in [0, 1]. ``to_bytes`` clamps and rounds half away from zero, so
``to_bytes(to_float(img)) == img`` for every 8-bit image.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Union

import numpy as np

PRNG_ALGORITHM = "philox4x64-10/sha256-key/v1"

SEVERITIES = (1, 2, 3, 4, 5)
CLEAN = "clean"


class MedCorruptError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(MedCorruptError, ValueError):
    """A kernel hyperparameter is outside its valid range."""


class ApplicabilityError(MedCorruptError):
    """A corruption cannot be applied to this kind of image (e.g. RGB-only on grayscale)."""


class CorruptionCategory(str, enum.Enum):
    DIGITAL = "digital"
    NOISE = "noise"
    BLUR = "blur"
    COLOR = "color"
    TASK_SPECIFIC = "task_specific"


def check_severity(severity: int) -> int:
    if isinstance(severity, bool) or int(severity) != severity or severity not in SEVERITIES:
        raise ParameterError(f"severity must be an integer in 1..5, got {severity!r}")
    return int(severity)


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """An H x W x C raster of 8-bit samples, C in {1, 3}.

    The backing array is copied on construction and marked read-only, so an
    ImageBuffer can be shared freely between threads.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected HxW, HxWx1 or HxWx3 array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.integer) and (arr.min(initial=0) < 0 or arr.max(initial=0) > 255):
                raise ValueError("8-bit samples must lie in [0, 255]")
            if not np.issubdtype(arr.dtype, np.integer):
                raise TypeError(f"ImageBuffer needs integer samples, got {arr.dtype}; use to_bytes() for floats")
        arr = np.array(arr, dtype=np.uint8, copy=True, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None

    def __repr__(self):
        return f"ImageBuffer({self.height}x{self.width}x{self.channels})"


def to_float(img: ImageBuffer) -> np.ndarray:
    """Return a writable float32 copy of the image scaled to [0, 1]."""
    return img.data.astype(np.float32) / np.float32(255.0)


def to_bytes(raster: np.ndarray) -> ImageBuffer:
    """Clamp a float raster to [0, 1] and round half away from zero onto 0..255."""
    x = np.clip(np.asarray(raster, dtype=np.float64), 0.0, 1.0) * 255.0
    # samples are nonnegative after clipping, so floor(x + 0.5) is half-away-from-zero
    return ImageBuffer(np.floor(x + 0.5).astype(np.uint8))


def _derivation_key(derivation: tuple) -> int:
    payload = json.dumps(["medcorrupt-rng", PRNG_ALGORITHM, *derivation], separators=(",", ":"))
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


@dataclass
class RngStream:
    """A deterministic random stream bound to the tuple it was derived from.

    Backed by numpy's Philox counter-based generator, whose output is fixed by
    the key alone and therefore identical across platforms. Never share one
    stream between threads; derive one per unit of work instead.
    """

    derivation: tuple
    generator: np.random.Generator = field(repr=False)

    @classmethod
    def from_derivation(cls, derivation: tuple) -> "RngStream":
        key = _derivation_key(derivation)
        return cls(derivation, np.random.Generator(np.random.Philox(key=key)))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def integers(self, low, high=None, size=None, endpoint=False):
        return self.generator.integers(low, high, size=size, endpoint=endpoint)

    def poisson(self, lam, size=None):
        return self.generator.poisson(lam, size)

    def bytes(self, n: int) -> bytes:
        return self.generator.bytes(n)


def derive_stream(
    master_seed: int,
    dataset_id: str,
    corruption_id: str,
    severity: Union[int, str],
    image_index: int,
) -> RngStream:
    """Derive the stream for one (dataset, corruption, severity, image) unit of work.

    ``severity`` may be 1..5 or ``"clean"`` (stored as 0).
    """
    if severity == CLEAN or severity == 0:
        sev = 0
    else:
        sev = check_severity(severity)
    seed = int(master_seed)
    if not -(2**63) <= seed < 2**64:
        raise ParameterError("master_seed must fit in 64 bits")
    return RngStream.from_derivation((seed, str(dataset_id), str(corruption_id), sev, int(image_index)))
