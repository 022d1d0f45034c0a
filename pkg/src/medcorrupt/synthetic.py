"""Procedural test images with smooth structure, edges and fine texture.

Used by the test-suite, the benchmark scripts and the fixture generator;
real image data is not redistributed here.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import ImageBuffer, to_bytes


def synthetic_image(seed: int, size: int | tuple[int, int] = 224, channels: int = 3) -> ImageBuffer:
    h, w = (size, size) if isinstance(size, int) else size
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.normal(size=(h, w)), sigma=max(h, w) / 12, mode="wrap")
    base = (base - base.min()) / (np.ptp(base) + 1e-12)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(rng.integers(3, 7)):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(0.05, 0.2) * min(h, w)
        base = np.where((yy - cy) ** 2 + (xx - cx) ** 2 < r * r, base * 0.5 + rng.uniform(0.3, 0.9) * 0.5, base)
    detail = ndimage.gaussian_filter(rng.normal(size=(h, w)), sigma=1.0)
    gray = 0.15 + 0.7 * base + 0.08 * detail
    if channels == 1:
        return to_bytes(gray)
    tint = rng.uniform(0.6, 1.0, size=3)
    shift = ndimage.gaussian_filter(rng.normal(size=(h, w, 3)), sigma=(h / 16, w / 16, 0)) * 2.0
    rgb = gray[:, :, None] * tint + shift * 0.15
    return to_bytes(rgb)


def synthetic_batch(n: int, size=224, channels: int = 3, seed: int = 0) -> list[ImageBuffer]:
    return [synthetic_image(seed * 100_003 + i, size, channels) for i in range(n)]


def synthetic_predictions(profile, n_images: int = 40, seed: int = 0, skill: float = 2.0, fragility: float = 1.0):
    """A complete prediction table for ``profile`` from a simulated classifier.

    Scores are true-class logits of height ``skill`` plus Gaussian noise whose
    scale grows with severity times ``fragility``. Every stratum covers the
    same ``n_images`` image ids.
    """
    from .core import CLEAN, SEVERITIES
    from .metrics import PredictionTable

    rng = np.random.default_rng(seed)
    k = profile.n_classes
    multilabel = profile.task == "multilabel"
    if multilabel:
        labels = (rng.random((n_images, k)) < 0.3).astype(np.int64)
        labels[np.arange(n_images), np.arange(n_images) % k] = 1
    else:
        labels = np.arange(n_images) % k
        rng.shuffle(labels)
    ids = np.array([f"img{i:04d}" for i in range(n_images)], dtype=object)

    strata = [(CLEAN, 0)] + [(c, s) for c in profile.corruption_ids for s in SEVERITIES]
    cols = {"image_id": [], "corruption": [], "severity": [], "labels": [], "scores": []}
    for j, (c, s) in enumerate(strata):
        noise = 1.0 + fragility * s * (0.5 + (j % 3) * 0.25)
        if multilabel:
            logits = np.where(labels == 1, skill, -skill) + rng.normal(0, noise, (n_images, k))
            scores = 1.0 / (1.0 + np.exp(-logits))
        else:
            scores = rng.normal(0, noise, (n_images, k))
            scores[np.arange(n_images), labels] += skill
        cols["image_id"].append(ids)
        cols["corruption"].append(np.full(n_images, c, dtype=object))
        cols["severity"].append(np.full(n_images, s))
        cols["labels"].append(labels)
        cols["scores"].append(scores)
    return PredictionTable(
        np.concatenate(cols["image_id"]),
        np.concatenate(cols["corruption"]),
        np.concatenate(cols["severity"]).astype(np.int64),
        np.concatenate(cols["labels"]),
        np.concatenate(cols["scores"]),
    )


def write_image_folder(root, n: int, size=224, channels: int = 3, seed: int = 0, n_classes: int = 2):
    """Write ``n`` synthetic PNGs plus ``index.csv`` under ``root``; returns the index rows."""
    from .pipeline import IndexRow, save_png, write_index

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, img in enumerate(synthetic_batch(n, size, channels, seed)):
        rel = f"images/img{i:04d}.png"
        save_png(img, root / rel)
        rows.append(IndexRow(f"img{i:04d}", rel, str(i % n_classes)))
    write_index(root, rows)
    return rows
