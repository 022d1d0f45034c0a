"""Targeted augmentation: one uniformly chosen corruption (or none) per image.

For a dataset with corruption set C, every image draws one option from
C plus identity with equal probability. A drawn corruption gets
hyperparameters sampled between its severity-1 and severity-5 values: float
scalars from a continuous uniform, integer scalars uniformly from the
inclusive integer range. Each scalar is drawn independently.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .core import ImageBuffer, MedCorruptError, RngStream, derive_stream
from .kernels import apply_params
from .registry import Registry, default_registry

IDENTITY = "identity"


@dataclass(frozen=True)
class SampledAugmentation:
    corruption_id: str
    params: dict = field(default_factory=dict)

    @property
    def is_identity(self) -> bool:
        return self.corruption_id == IDENTITY


@dataclass
class AugmentationPolicy:
    """Sampler state for one dataset. ``rng`` advances with every draw."""

    dataset_id: str
    rng: RngStream
    registry: Registry = field(default_factory=default_registry)

    def __post_init__(self):
        self.extended_set = (*self.registry.corruption_set(self.dataset_id), IDENTITY)
        self._endpoints = {
            cid: self.registry.param_endpoints(cid, self.dataset_id) for cid in self.extended_set[:-1]
        }

    @classmethod
    def from_seed(cls, dataset_id: str, seed: int, registry: Registry | None = None) -> "AugmentationPolicy":
        rng = derive_stream(seed, dataset_id, "augment", "clean", 0)
        return cls(dataset_id, rng, registry or default_registry())

    def endpoints(self, corruption_id: str) -> tuple[dict, dict]:
        return self._endpoints[corruption_id]

    def sample(self) -> SampledAugmentation:
        return sample(self)


def _draw(rng: RngStream, e1, e5):
    lo, hi = min(e1, e5), max(e1, e5)
    if isinstance(e1, int) and isinstance(e5, int):
        return int(rng.integers(lo, hi, endpoint=True))
    if lo == hi:
        return float(lo)
    return float(rng.uniform(lo, hi))


def sample(policy: AugmentationPolicy) -> SampledAugmentation:
    """Draw one option uniformly from the extended set and its hyperparameters."""
    rng = policy.rng
    choice = policy.extended_set[int(rng.integers(0, len(policy.extended_set)))]
    if choice == IDENTITY:
        return SampledAugmentation(IDENTITY)
    s1, s5 = policy.endpoints(choice)
    return SampledAugmentation(choice, {name: _draw(rng, s1[name], s5[name]) for name in s1})


def augment_image(img: ImageBuffer, policy: AugmentationPolicy) -> ImageBuffer:
    profile = policy.registry.profile(policy.dataset_id)
    if img.channels != profile.channels:
        raise MedCorruptError(
            f"{policy.dataset_id} expects {profile.channels}-channel images, got {img.channels}"
        )
    drawn = sample(policy)
    if drawn.is_identity:
        return img
    return apply_params(img, drawn.corruption_id, drawn.params, policy.rng)


def augment_batch(imgs: Sequence[ImageBuffer], policy: AugmentationPolicy, workers: int = 1) -> list[ImageBuffer]:
    """Augment each image with its own stream derived from one draw of ``policy.rng``.

    The result depends only on the policy's rng state, never on ``workers``.
    """
    if not imgs:
        return []
    batch_seed = int(policy.rng.integers(0, 2**63))

    def one(i: int) -> ImageBuffer:
        rng = derive_stream(batch_seed, policy.dataset_id, "augment", "clean", i)
        return augment_image(imgs[i], AugmentationPolicy(policy.dataset_id, rng, policy.registry))

    if workers <= 1:
        return [one(i) for i in range(len(imgs))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(imgs))))
