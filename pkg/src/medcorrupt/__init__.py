"""Severity-graded medical image corruptions, targeted augmentation and
balanced-error robustness metrics."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    CLEAN,
    SEVERITIES,
    ApplicabilityError,
    CorruptionCategory,
    ImageBuffer,
    MedCorruptError,
    ParameterError,
    RngStream,
    derive_stream,
    to_bytes,
    to_float,
)
from .registry import Registry, default_registry, load_registry  # noqa: E402

__all__ = [
    "CLEAN",
    "SEVERITIES",
    "ApplicabilityError",
    "CorruptionCategory",
    "ImageBuffer",
    "MedCorruptError",
    "ParameterError",
    "Registry",
    "RngStream",
    "default_registry",
    "derive_stream",
    "load_registry",
    "to_bytes",
    "to_float",
]
