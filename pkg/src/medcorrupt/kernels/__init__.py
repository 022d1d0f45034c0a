"""Corruption kernels and the dispatcher that maps corruption ids onto them.

Every kernel is a pure function of (image, hyperparameters, rng stream) and
returns a new :class:`~medcorrupt.core.ImageBuffer` of the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

from ..core import ApplicabilityError, ImageBuffer, MedCorruptError, RngStream, check_severity
from .blur import blur, disk_kernel, motion_kernel, zoom_factors
from .color import adjust_color
from .digital import jpeg_compress, pixelate
from .noise import add_noise
from .overlays import (
    black_corner,
    bubble_geometry,
    character_layout,
    corner_weight,
    overlay_bubble,
    overlay_characters,
    overlay_stain,
    stain_geometry,
)

KernelParams = Mapping[str, float]


class UnknownCorruptionError(MedCorruptError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class Kernel:
    run: Callable[[ImageBuffer, KernelParams, RngStream], ImageBuffer]
    params: tuple[str, ...]
    stochastic: bool = False
    rgb_only: bool = False


def _color(kind):
    return lambda img, p, rng: adjust_color(img, kind, p)


KERNELS: dict[str, Kernel] = {
    "jpeg": Kernel(lambda img, p, rng: jpeg_compress(img, p["quality"]), ("quality",)),
    "pixelate": Kernel(lambda img, p, rng: pixelate(img, p["factor"]), ("factor",)),
    "gaussian_noise": Kernel(lambda img, p, rng: add_noise(img, "gaussian", p, rng), ("sigma",), stochastic=True),
    "speckle_noise": Kernel(lambda img, p, rng: add_noise(img, "speckle", p, rng), ("sigma",), stochastic=True),
    "impulse_noise": Kernel(lambda img, p, rng: add_noise(img, "impulse", p, rng), ("amount",), stochastic=True),
    "shot_noise": Kernel(lambda img, p, rng: add_noise(img, "shot", p, rng), ("photons",), stochastic=True),
    "gaussian_blur": Kernel(lambda img, p, rng: blur(img, "gaussian", p, rng), ("sigma",)),
    "defocus_blur": Kernel(lambda img, p, rng: blur(img, "defocus", p, rng), ("radius",)),
    "motion_blur": Kernel(lambda img, p, rng: blur(img, "motion", p, rng), ("length",), stochastic=True),
    "zoom_blur": Kernel(lambda img, p, rng: blur(img, "zoom", p, rng), ("max_zoom",)),
    "brightness+": Kernel(_color("brightness+"), ("intensity",)),
    "brightness-": Kernel(_color("brightness-"), ("intensity",)),
    "contrast+": Kernel(_color("contrast+"), ("factor",)),
    "contrast-": Kernel(_color("contrast-"), ("factor",)),
    "saturate": Kernel(_color("saturate"), ("factor",), rgb_only=True),
    "gamma+": Kernel(_color("gamma+"), ("gamma",)),
    "gamma-": Kernel(_color("gamma-"), ("gamma",)),
    "stain_deposit": Kernel(
        lambda img, p, rng: overlay_stain(img, p["count"], (p["min_radius"], p["max_radius"]), rng),
        ("count", "min_radius", "max_radius"),
        stochastic=True,
        rgb_only=True,
    ),
    "bubble": Kernel(
        lambda img, p, rng: overlay_bubble(img, p["count"], (p["min_radius"], p["max_radius"]), rng),
        ("count", "min_radius", "max_radius"),
        stochastic=True,
        rgb_only=True,
    ),
    "black_corner": Kernel(lambda img, p, rng: black_corner(img, p["radius_fraction"]), ("radius_fraction",)),
    "characters": Kernel(
        lambda img, p, rng: overlay_characters(img, p["count"], p["glyph_scale"], rng),
        ("count", "glyph_scale"),
        stochastic=True,
    ),
}


def kernel_for(corruption_id: str) -> Kernel:
    try:
        return KERNELS[corruption_id]
    except KeyError:
        raise UnknownCorruptionError(f"unknown corruption {corruption_id!r}") from None


def apply_params(img: ImageBuffer, corruption_id: str, params: KernelParams, rng: RngStream) -> ImageBuffer:
    """Run one corruption with explicit hyperparameters."""
    kernel = kernel_for(corruption_id)
    if kernel.rgb_only and img.channels != 3:
        raise ApplicabilityError(f"{corruption_id} is defined for RGB images only")
    return kernel.run(img, params, rng)


def apply(img: ImageBuffer, corruption_id: str, severity: int, rng: RngStream, registry, dataset_id: str | None = None) -> ImageBuffer:
    """Look up the severity's hyperparameters in ``registry`` and run the kernel.

    With ``dataset_id`` the dataset-level table is used; otherwise the
    registry-wide default table.
    """
    severity = check_severity(severity)
    params = registry.params_for(corruption_id, severity, dataset_id)
    return apply_params(img, corruption_id, params, rng)


__all__ = [
    "KERNELS",
    "Kernel",
    "KernelParams",
    "UnknownCorruptionError",
    "add_noise",
    "adjust_color",
    "apply",
    "apply_params",
    "black_corner",
    "blur",
    "bubble_geometry",
    "character_layout",
    "corner_weight",
    "disk_kernel",
    "jpeg_compress",
    "kernel_for",
    "motion_kernel",
    "overlay_bubble",
    "overlay_characters",
    "overlay_stain",
    "pixelate",
    "stain_geometry",
    "zoom_factors",
]
