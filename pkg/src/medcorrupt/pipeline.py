"""Batch generation of corrupted test sets, manifests, verification and evaluation.

Input directory layout::

    <input>/index.csv          image_id,path,label   (path relative to <input>)
    <input>/<path>             PNG or any format Pillow decodes to L or RGB

Output layout::

    <output>/<corruption>/<severity>/<image_id>.png
    <output>/manifest.json     written last; absent means the run did not finish
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import __version__
from .core import PRNG_ALGORITHM, SEVERITIES, ImageBuffer, MedCorruptError, check_severity, derive_stream
from .kernels import apply
from .metrics import RobustnessReport, error_grid, read_predictions, robustness_report
from .registry import Registry, default_registry

MANIFEST_NAME = "manifest.json"
RUN_STAMP = ".medcorrupt-run.json"
INDEX_NAME = "index.csv"
FORMAT_VERSION = 1
_SAFE_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class DataError(MedCorruptError):
    """Input data cannot be read or does not match the dataset profile."""


class PartialOutputError(MedCorruptError):
    """The output directory holds an unfinished or foreign run."""


@dataclass(frozen=True)
class IndexRow:
    image_id: str
    path: str
    label: str


@dataclass(frozen=True)
class InputIndex:
    root: Path
    rows: tuple[IndexRow, ...]

    def __len__(self):
        return len(self.rows)


def read_index(input_dir: str | Path) -> InputIndex:
    root = Path(input_dir)
    path = root / INDEX_NAME
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open input index {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"image_id", "path"} <= set(reader.fieldnames):
            raise DataError(f"{path}: header must contain image_id,path[,label]")
        rows = []
        seen = set()
        for lineno, rec in enumerate(reader, start=2):
            image_id = (rec["image_id"] or "").strip()
            if not _SAFE_ID.match(image_id):
                raise DataError(f"{path}:{lineno}: image_id {image_id!r} is not a safe file name")
            if image_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            rows.append(IndexRow(image_id, rec["path"].strip(), (rec.get("label") or "").strip()))
    return InputIndex(root, tuple(rows))


def write_index(input_dir: str | Path, rows: Iterable[IndexRow]) -> None:
    with open(Path(input_dir) / INDEX_NAME, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["image_id", "path", "label"])
        for r in rows:
            w.writerow([r.image_id, r.path, r.label])


def load_image(path: str | Path, channels: int | None = None) -> ImageBuffer:
    """Decode an 8-bit grayscale or RGB image; never converts between the two."""
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "P":
                im = im.convert("RGB")
                mode = "RGB"
            if mode not in ("L", "RGB"):
                raise DataError(f"{path}: unsupported image mode {mode!r} (need 8-bit L or RGB)")
            arr = np.asarray(im)
    except (OSError, UnidentifiedImageError) as exc:
        raise DataError(f"cannot decode {path}: {exc}") from exc
    img = ImageBuffer(arr)
    if channels is not None and img.channels != channels:
        raise DataError(f"{path}: has {img.channels} channel(s), dataset expects {channels}")
    return img


def encode_png(img: ImageBuffer) -> bytes:
    data = img.data[:, :, 0] if img.channels == 1 else img.data
    buf = io.BytesIO()
    Image.fromarray(data, mode="L" if img.channels == 1 else "RGB").save(buf, format="PNG", compress_level=6)
    return buf.getvalue()


def save_png(img: ImageBuffer, path: str | Path) -> str:
    """Write atomically; returns the sha256 of the written bytes."""
    payload = encode_png(img)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)
    return hashlib.sha256(payload).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Manifest:
    dataset: str
    master_seed: int
    registry_version: str
    registry_digest: str
    parameters: dict
    corruptions: list[str]
    severities: list[int]
    records: list[dict] = field(default_factory=list)
    tool_version: str = __version__
    prng: str = PRNG_ALGORITHM
    format_version: int = FORMAT_VERSION
    created: str = ""

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        return cls(**json.loads(text))

    def hashes(self) -> dict[str, str]:
        return {r["path"]: r["sha256"] for r in self.records}


def _select(values: Sequence, subset: Iterable | None) -> list:
    if subset is None:
        return list(values)
    wanted = set(subset)
    return [v for v in values if v in wanted]


def _corrupt_one_image(job):
    """Worker: every requested (corruption, severity) for one image."""
    index, row_path, image_id, channels, dataset_id, seed, pairs, out_dir, registry, skip = job
    img = load_image(row_path, channels)
    records = []
    for c, s in pairs:
        rel = f"{c}/{s}/{image_id}.png"
        target = Path(out_dir) / rel
        if rel in skip and target.exists():
            digest = sha256_file(target)
        else:
            out = apply(img, c, s, derive_stream(seed, dataset_id, c, s, index), registry, dataset_id)
            digest = save_png(out, target)
        records.append({"path": rel, "corruption": c, "severity": s, "image_index": index,
                        "image_id": image_id, "sha256": digest})
    return records


def generate_corrupted_set(
    input_dir: str | Path,
    dataset_id: str,
    master_seed: int,
    output_dir: str | Path,
    corruptions: Iterable[str] | None = None,
    severities: Iterable[int] | None = None,
    registry: Registry | None = None,
    workers: int = 1,
    resume: bool = False,
) -> Manifest:
    """Corrupt every indexed image at every selected (corruption, severity).

    Records are ordered by corruption (registry order), severity, image index.
    A rerun with the same inputs reproduces every file hash. An output
    directory with leftovers from an unfinished run is only reused with
    ``resume=True``, and only if seed, dataset and registry match.
    """
    registry = registry or default_registry()
    profile = registry.profile(dataset_id)
    index = read_index(input_dir)
    if corruptions is not None:
        corruptions = list(corruptions)
        unknown = sorted(set(corruptions) - set(profile.corruption_ids))
        if unknown:
            raise DataError(f"corruptions not defined for {dataset_id}: {unknown}")
    if severities is not None:
        severities = [check_severity(s) for s in severities]
    sel_c = _select(profile.corruption_ids, corruptions)
    sel_s = _select(SEVERITIES, severities)
    pairs = [(c, s) for c in sel_c for s in sel_s]

    out = Path(output_dir)
    stamp = {"dataset": dataset_id, "master_seed": int(master_seed), "registry_digest": registry.digest(), "prng": PRNG_ALGORITHM}
    skip = _prepare_output(out, stamp, resume)

    jobs = [
        (i, str(index.root / row.path), row.image_id, profile.channels, dataset_id, int(master_seed), pairs, str(out), registry, skip)
        for i, row in enumerate(index.rows)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_image = list(pool.map(_corrupt_one_image, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        per_image = [_corrupt_one_image(j) for j in jobs]

    order = {c: k for k, c in enumerate(profile.corruption_ids)}
    records = sorted((r for recs in per_image for r in recs),
                     key=lambda r: (order[r["corruption"]], r["severity"], r["image_index"]))
    manifest = Manifest(
        dataset=dataset_id,
        master_seed=int(master_seed),
        registry_version=registry.version,
        registry_digest=registry.digest(),
        parameters={c: t for c, t in registry.tables_for(dataset_id).items() if c in sel_c},
        corruptions=sel_c,
        severities=sel_s,
        records=records,
        created=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )
    expected = len(index) * len(pairs)
    if len(records) != expected:
        raise PartialOutputError(f"generated {len(records)} images, expected {expected}")
    (out / MANIFEST_NAME).write_text(manifest.to_json(), encoding="utf-8")
    (out / RUN_STAMP).unlink(missing_ok=True)
    return manifest


def _prepare_output(out: Path, stamp: dict, resume: bool) -> set[str]:
    """Create or vet the output directory; return relative paths reusable on resume."""
    out.mkdir(parents=True, exist_ok=True)
    existing = [p for p in out.rglob("*") if p.is_file()]
    if not existing:
        (out / RUN_STAMP).write_text(json.dumps(stamp), encoding="utf-8")
        return set()
    if not resume:
        state = "a finished run" if (out / MANIFEST_NAME).exists() else "an unfinished run"
        raise PartialOutputError(f"{out} already holds {state}; pass resume=True (--resume) or choose an empty directory")
    previous = None
    if (out / RUN_STAMP).exists():
        previous = json.loads((out / RUN_STAMP).read_text(encoding="utf-8"))
    elif (out / MANIFEST_NAME).exists():
        m = Manifest.from_json((out / MANIFEST_NAME).read_text(encoding="utf-8"))
        previous = {"dataset": m.dataset, "master_seed": m.master_seed, "registry_digest": m.registry_digest, "prng": m.prng}
    if previous != stamp:
        raise PartialOutputError(f"{out} holds output of a different run ({previous}); refusing to mix")
    for p in existing:
        if p.name.endswith(".tmp"):
            p.unlink()
    (out / MANIFEST_NAME).unlink(missing_ok=True)
    (out / RUN_STAMP).write_text(json.dumps(stamp), encoding="utf-8")
    return {p.relative_to(out).as_posix() for p in existing if p.suffix == ".png"}


@dataclass
class VerifyResult:
    checked: int
    problems: list[str]

    @property
    def ok(self) -> bool:
        return not self.problems


def verify_manifest(output_dir: str | Path) -> VerifyResult:
    """Recompute every recorded hash and look for files the manifest does not list."""
    out = Path(output_dir)
    try:
        manifest = Manifest.from_json((out / MANIFEST_NAME).read_text(encoding="utf-8"))
    except (OSError, ValueError, TypeError) as exc:
        return VerifyResult(0, [f"cannot read manifest: {exc}"])
    problems = []
    listed = manifest.hashes()
    for rel, digest in listed.items():
        p = out / rel
        if not p.is_file():
            problems.append(f"missing: {rel}")
        elif sha256_file(p) != digest:
            problems.append(f"hash mismatch: {rel}")
    for p in sorted(out.rglob("*")):
        rel = p.relative_to(out).as_posix()
        if p.is_file() and rel != MANIFEST_NAME and rel not in listed:
            problems.append(f"not in manifest: {rel}")
    return VerifyResult(len(listed), problems)


def evaluate(
    predictions: str | Path,
    baseline: str | Path,
    dataset_id: str,
    registry: Registry | None = None,
    threshold: float = 0.5,
) -> RobustnessReport:
    registry = registry or default_registry()
    profile = registry.profile(dataset_id)
    model_grid = error_grid(read_predictions(predictions, profile), profile, threshold)
    base_grid = error_grid(read_predictions(baseline, profile), profile, threshold)
    return robustness_report(model_grid, base_grid, profile)


def write_report(report: RobustnessReport, output_dir: str | Path, fmt: str = "md") -> list[Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json"]
    paths[0].write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    if fmt == "md":
        p = out / "report.md"
        p.write_text(report.to_markdown(), encoding="utf-8")
    elif fmt == "csv":
        p = out / "report.csv"
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["scope", "name", "BE", "rBE"])
            w.writeheader()
            w.writerows(report.table_rows())
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    paths.append(p)
    return paths


def describe_dataset(dataset_id: str, registry: Registry | None = None) -> str:
    registry = registry or default_registry()
    profile = registry.profile(dataset_id)
    lines = [
        f"{profile.dataset_id}: task={profile.task} channels={profile.channels} classes={profile.n_classes}",
        f"{len(profile.corruptions)} corruptions (registry {registry.version})",
    ]
    for cat, ids in profile.categories().items():
        lines.append(f"  {cat.value}: {', '.join(ids)}")
    lines.append("")
    for spec in profile.corruptions:
        lines.append(f"{spec.corruption_id} [{spec.category.value}]{' stochastic' if spec.stochastic else ''}")
        for name, values in spec.table().items():
            lines.append(f"  {name:<16}" + "  ".join(f"{v:>7g}" for v in values))
    return "\n".join(lines) + "\n"


def gallery(img: ImageBuffer, dataset_id: str, seed: int = 0, registry: Registry | None = None) -> ImageBuffer:
    """Contact sheet: one row per corruption, one column per severity 1..5."""
    registry = registry or default_registry()
    profile = registry.profile(dataset_id)
    if img.channels != profile.channels:
        raise DataError(f"{dataset_id} expects {profile.channels}-channel images, got {img.channels}")
    rows = []
    for c in profile.corruption_ids:
        tiles = [apply(img, c, s, derive_stream(seed, dataset_id, c, s, 0), registry, dataset_id).data for s in SEVERITIES]
        rows.append(np.concatenate(tiles, axis=1))
    return ImageBuffer(np.concatenate(rows, axis=0))
