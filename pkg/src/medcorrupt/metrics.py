"""Balanced-error robustness metrics normalized against a baseline model.

Per stratum (one corruption at one severity, or the clean test set) the
balanced error is ``1 - mean per-class recall``; multi-label tasks take the
binary balanced error of every label and average over labels. Ordinal tasks
are scored as multi-class.

Per corruption c, with sums over severities 1..5::

    BE_c  = sum_s BE[s, c] / sum_s BE_base[s, c]
    rBE_c = sum_s (BE[s, c] - BE_clean) / sum_s (BE_base[s, c] - BE_base_clean)

Overall BE and rBE are plain means over corruptions. Corruptions whose
baseline denominator is not above the guard are reported as undefined and
left out of every mean.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import CLEAN, SEVERITIES, CorruptionCategory, MedCorruptError
from .registry import DatasetProfile

EPS_NORMALIZED = 1e-9
EPS_RELATIVE = 1e-6
MULTILABEL_THRESHOLD = 0.5


class PredictionTableError(MedCorruptError, ValueError):
    """A prediction table is malformed or inconsistent with the dataset profile."""


class IncompleteError(MedCorruptError):
    """Some (corruption, severity) strata are missing or cover the wrong images."""

    def __init__(self, gaps: list, detail: str = "missing strata"):
        self.gaps = list(gaps)
        shown = ", ".join(f"{c}/{s}" for c, s in self.gaps)
        super().__init__(f"{detail} ({len(self.gaps)}): {shown}")


class AbsentClassWarning(UserWarning):
    """A class has no true instances in a stratum and was left out of the recall mean."""


def _is_multilabel(task: str) -> bool:
    return task == "multilabel"


def balanced_error_details(labels, scores, task: str, threshold: float = MULTILABEL_THRESHOLD):
    """Return ``(balanced_error, absent)`` where ``absent`` lists excluded classes.

    Multi-class decisions take the argmax of ``scores`` (first index on ties);
    multi-label decisions threshold each score at ``threshold``. For
    multi-label tasks ``absent`` holds ``(label, 0 or 1)`` pairs.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape[0] == 0:
        raise PredictionTableError("cannot compute balanced error of an empty stratum")
    if scores.ndim != 2 or scores.shape[0] != labels.shape[0]:
        raise PredictionTableError(f"scores must be (n, K) with n = {labels.shape[0]}, got {scores.shape}")

    if _is_multilabel(task):
        if labels.shape != scores.shape:
            raise PredictionTableError(f"multi-label targets {labels.shape} do not match scores {scores.shape}")
        truth = labels.astype(bool)
        pred = scores >= threshold
        per_label, absent = [], []
        for j in range(truth.shape[1]):
            t, p = truth[:, j], pred[:, j]
            recalls = []
            for cls, mask in ((0, ~t), (1, t)):
                n = int(mask.sum())
                if n == 0:
                    absent.append((j, cls))
                    continue
                hits = int((p[mask] == bool(cls)).sum())
                recalls.append(hits / n)
            per_label.append(1.0 - float(np.mean(recalls)))
        return float(np.mean(per_label)), absent

    k = scores.shape[1]
    labels = labels.astype(np.int64)
    if labels.ndim != 1 or labels.min() < 0 or labels.max() >= k:
        raise PredictionTableError(f"labels must be class indices in [0, {k})")
    pred = np.argmax(scores, axis=1)
    confusion = np.bincount(labels * k + pred, minlength=k * k).reshape(k, k)
    support = confusion.sum(axis=1)
    present = support > 0
    recalls = np.diag(confusion)[present] / support[present]
    absent = [int(c) for c in np.flatnonzero(~present)]
    return 1.0 - float(np.mean(recalls)), absent


def balanced_error(labels, scores, task: str, threshold: float = MULTILABEL_THRESHOLD) -> float:
    """Balanced error of one stratum; warns with :class:`AbsentClassWarning` if classes are missing."""
    value, absent = balanced_error_details(labels, scores, task, threshold)
    if absent:
        warnings.warn(f"classes without true instances excluded: {absent}", AbsentClassWarning, stacklevel=2)
    return value


@dataclass(frozen=True)
class PredictionTable:
    """Per-image scores, one row per (image, corruption, severity).

    ``labels`` is ``(n,)`` of class indices, or ``(n, L)`` multi-hot for
    multi-label tasks. Clean rows carry corruption ``"clean"`` and severity 0.
    """

    image_id: np.ndarray
    corruption: np.ndarray
    severity: np.ndarray
    labels: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        n = len(self.image_id)
        for name in ("corruption", "severity", "labels", "scores"):
            if len(getattr(self, name)) != n:
                raise PredictionTableError(f"column {name} has {len(getattr(self, name))} rows, expected {n}")
        clean = self.corruption == CLEAN
        if np.any(clean != (self.severity == 0)):
            raise PredictionTableError("severity 0 must coincide with corruption 'clean'")
        bad = ~clean & ~np.isin(self.severity, SEVERITIES)
        if np.any(bad):
            raise PredictionTableError(f"severity must be 1..5 for corrupted rows, got {sorted(set(self.severity[bad]))}")

    @classmethod
    def from_rows(cls, rows: Iterable[tuple]) -> "PredictionTable":
        """Build from ``(image_id, corruption, severity, label, scores)`` tuples."""
        rows = list(rows)
        if not rows:
            raise PredictionTableError("prediction table has no rows")
        ids, corr, sev, lab, sc = zip(*rows)
        return cls(
            np.array(ids, dtype=object),
            np.array(corr, dtype=object),
            np.array(sev, dtype=np.int64),
            np.array(lab),
            np.array(sc, dtype=np.float64),
        )

    @property
    def n_rows(self) -> int:
        return len(self.image_id)

    def strata(self) -> dict[tuple[str, int], np.ndarray]:
        """Row indices per (corruption, severity), in first-appearance order."""
        out: dict[tuple[str, int], list[int]] = {}
        for i, key in enumerate(zip(self.corruption, self.severity)):
            out.setdefault((str(key[0]), int(key[1])), []).append(i)
        return {k: np.array(v) for k, v in out.items()}


@dataclass(frozen=True)
class ErrorGrid:
    """Clean balanced error plus the (corruption x severity) grid of balanced errors."""

    clean: float
    corruptions: tuple[str, ...]
    values: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (len(self.corruptions), len(SEVERITIES)):
            raise ValueError(f"grid must be {len(self.corruptions)}x5, got {values.shape}")
        if not (0.0 <= self.clean <= 1.0) or np.any((values < 0) | (values > 1)):
            raise ValueError("balanced errors must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def be(self, corruption: str, severity: int) -> float:
        return float(self.values[self.corruptions.index(corruption), severity - 1])

    def row(self, corruption: str) -> np.ndarray:
        return self.values[self.corruptions.index(corruption)]


def error_grid(preds: PredictionTable, profile: DatasetProfile, threshold: float = MULTILABEL_THRESHOLD) -> ErrorGrid:
    """Evaluate every stratum required by ``profile``.

    Raises :class:`IncompleteError` naming each missing stratum, or each
    stratum whose image ids differ from the clean stratum's.
    """
    multilabel = _is_multilabel(profile.task)
    if preds.scores.ndim != 2 or preds.scores.shape[1] != profile.n_classes:
        raise PredictionTableError(
            f"{profile.dataset_id} has {profile.n_classes} classes but scores have shape {preds.scores.shape}"
        )
    if multilabel and (preds.labels.ndim != 2 or preds.labels.shape[1] != profile.n_classes):
        raise PredictionTableError(f"{profile.dataset_id} needs {profile.n_classes}-wide multi-hot targets")

    strata = preds.strata()
    known = set(profile.corruption_ids) | {CLEAN}
    stray = sorted({c for c, _ in strata} - known)
    if stray:
        raise PredictionTableError(f"corruptions not in {profile.dataset_id}: {stray}")
    required = [(CLEAN, 0)] + [(c, s) for c in profile.corruption_ids for s in SEVERITIES]
    missing = [key for key in required if key not in strata]
    if missing:
        raise IncompleteError(missing)

    def ids(key):
        return preds.image_id[strata[key]]

    clean_ids = ids((CLEAN, 0))
    if len(set(clean_ids)) != len(clean_ids):
        raise PredictionTableError("clean stratum lists an image id twice")
    clean_set = set(clean_ids)
    mismatched = [
        key for key in required[1:] if len(ids(key)) != len(clean_ids) or set(ids(key)) != clean_set
    ]
    if mismatched:
        raise IncompleteError(mismatched, "strata not covering the clean image set")

    notes: list[str] = []

    def evaluate(key):
        rows = strata[key]
        value, absent = balanced_error_details(preds.labels[rows], preds.scores[rows], profile.task, threshold)
        if absent:
            notes.append(f"{key[0]}/{key[1]}: classes without true instances excluded: {absent}")
        return value

    clean = evaluate((CLEAN, 0))
    values = np.array([[evaluate((c, s)) for s in SEVERITIES] for c in profile.corruption_ids])
    return ErrorGrid(clean, profile.corruption_ids, values, tuple(notes))


@dataclass(frozen=True)
class CorruptionScores:
    """Per-corruption ratios and their mean; undefined entries are NaN."""

    per_corruption: Mapping[str, float]
    undefined: tuple[str, ...]
    overall: float


def _check_aligned(model: ErrorGrid, baseline: ErrorGrid) -> None:
    if model.corruptions != baseline.corruptions:
        raise ValueError(f"grids index different corruptions: {model.corruptions} vs {baseline.corruptions}")


def _mean_defined(values: Iterable[float]) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


def normalized_be(model: ErrorGrid, baseline: ErrorGrid, eps: float = EPS_NORMALIZED) -> CorruptionScores:
    """Severity-summed model error over severity-summed baseline error, per corruption."""
    _check_aligned(model, baseline)
    out, undefined = {}, []
    for i, c in enumerate(model.corruptions):
        denom = float(np.sum(baseline.values[i]))
        if denom <= eps:
            out[c] = math.nan
            undefined.append(c)
        else:
            out[c] = float(np.sum(model.values[i])) / denom
    return CorruptionScores(out, tuple(undefined), _mean_defined(out.values()))


def relative_be(model: ErrorGrid, baseline: ErrorGrid, eps: float = EPS_RELATIVE) -> CorruptionScores:
    """Like :func:`normalized_be` after subtracting each model's clean error.

    A baseline whose summed degradation is not above ``eps`` (including a
    negative one) leaves the corruption undefined.
    """
    _check_aligned(model, baseline)
    out, undefined = {}, []
    for i, c in enumerate(model.corruptions):
        denom = float(np.sum(baseline.values[i] - baseline.clean))
        if denom <= eps:
            out[c] = math.nan
            undefined.append(c)
        else:
            out[c] = float(np.sum(model.values[i] - model.clean)) / denom
    return CorruptionScores(out, tuple(undefined), _mean_defined(out.values()))


def category_summary(per_corruption: Mapping[str, float], profile: DatasetProfile) -> dict[CorruptionCategory, float]:
    """Mean of the per-corruption values within each category the dataset uses."""
    return {
        cat: _mean_defined(per_corruption[c] for c in ids)
        for cat, ids in profile.categories().items()
    }


@dataclass(frozen=True)
class RobustnessReport:
    dataset_id: str
    model_clean_be: float
    baseline_clean_be: float
    model_corrupted_be: float
    be: CorruptionScores
    rbe: CorruptionScores
    be_by_category: Mapping[CorruptionCategory, float]
    rbe_by_category: Mapping[CorruptionCategory, float]
    categories: Mapping[CorruptionCategory, tuple[str, ...]]
    warnings: tuple[str, ...] = field(default=())

    def to_dict(self, scale: float = 100.0) -> dict:
        """JSON-ready view; BE/rBE ratios multiplied by ``scale`` (NaN becomes None)."""

        def s(v):
            return None if math.isnan(v) else v * scale

        return {
            "dataset": self.dataset_id,
            "clean_bacc": 1.0 - self.model_clean_be,
            "corrupted_bacc": 1.0 - self.model_corrupted_be,
            "baseline_clean_bacc": 1.0 - self.baseline_clean_be,
            "BE": s(self.be.overall),
            "rBE": s(self.rbe.overall),
            "BE_by_category": {k.value: s(v) for k, v in self.be_by_category.items()},
            "rBE_by_category": {k.value: s(v) for k, v in self.rbe_by_category.items()},
            "BE_by_corruption": {k: s(v) for k, v in self.be.per_corruption.items()},
            "rBE_by_corruption": {k: s(v) for k, v in self.rbe.per_corruption.items()},
            "undefined": {"BE": list(self.be.undefined), "rBE": list(self.rbe.undefined)},
            "warnings": list(self.warnings),
        }

    def table_rows(self) -> list[dict]:
        """One row per corruption plus category and overall rows, values scaled by 100."""

        def s(v):
            return "" if math.isnan(v) else f"{100 * v:.1f}"

        rows = [{"scope": "corruption", "name": c, "BE": s(v), "rBE": s(self.rbe.per_corruption[c])}
                for c, v in self.be.per_corruption.items()]
        rows += [{"scope": "category", "name": k.value, "BE": s(v), "rBE": s(self.rbe_by_category[k])}
                 for k, v in self.be_by_category.items()]
        rows.append({"scope": "overall", "name": "all", "BE": s(self.be.overall), "rBE": s(self.rbe.overall)})
        return rows

    def to_markdown(self) -> str:
        d = self.to_dict()
        cats = list(self.be_by_category)
        head = ["bACC clean", "bACC corrupted", "rBE", "BE"] + [_CATEGORY_LABELS[c] for c in cats]

        def f(v):
            return "n/a" if v is None else f"{v:.1f}"

        cells = [f(100 * d["clean_bacc"]), f(100 * d["corrupted_bacc"]), f(d["rBE"]), f(d["BE"])]
        cells += [f(d["BE_by_category"][c.value]) for c in cats]
        lines = [
            f"### {self.dataset_id}",
            "",
            "| " + " | ".join(head) + " |",
            "|" + "---|" * len(head),
            "| " + " | ".join(cells) + " |",
            "",
            "| corruption | category | BE | rBE |",
            "|---|---|---|---|",
        ]
        cat_of = {c: k for k, ids in self.categories.items() for c in ids}
        for c in self.be.per_corruption:
            lines.append(f"| {c} | {cat_of[c].value} | {f(d['BE_by_corruption'][c])} | {f(d['rBE_by_corruption'][c])} |")
        undefined = sorted(set(self.be.undefined) | set(self.rbe.undefined))
        if undefined:
            lines += ["", f"Undefined (degenerate baseline denominator): {', '.join(undefined)}"]
        return "\n".join(lines) + "\n"


_CATEGORY_LABELS = {
    CorruptionCategory.DIGITAL: "Digital",
    CorruptionCategory.NOISE: "Noise",
    CorruptionCategory.BLUR: "Blur",
    CorruptionCategory.COLOR: "Color",
    CorruptionCategory.TASK_SPECIFIC: "TS",
}


def robustness_report(model: ErrorGrid, baseline: ErrorGrid, profile: DatasetProfile, dataset_id: str | None = None) -> RobustnessReport:
    be = normalized_be(model, baseline)
    rbe = relative_be(model, baseline)
    return RobustnessReport(
        dataset_id=dataset_id or profile.dataset_id,
        model_clean_be=model.clean,
        baseline_clean_be=baseline.clean,
        model_corrupted_be=float(np.mean(model.values)),
        be=be,
        rbe=rbe,
        be_by_category=category_summary(be.per_corruption, profile),
        rbe_by_category=category_summary(rbe.per_corruption, profile),
        categories=profile.categories(),
        warnings=tuple(f"model {w}" for w in model.warnings) + tuple(f"baseline {w}" for w in baseline.warnings),
    )


def read_predictions(path: str | Path, profile: DatasetProfile) -> PredictionTable:
    """Parse ``image_id,corruption,severity,true,score_0..score_{K-1}``.

    Multi-label targets are ``|``-separated multi-hot strings, e.g. ``0|1|0``.
    Errors name the file and line.
    """
    path = Path(path)
    k = profile.n_classes
    expected = ["image_id", "corruption", "severity", "true"] + [f"score_{i}" for i in range(k)]
    multilabel = _is_multilabel(profile.task)
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise PredictionTableError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected:
            raise PredictionTableError(f"{path}: header must be {','.join(expected)}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(expected):
                raise PredictionTableError(f"{path}:{lineno}: expected {len(expected)} fields, got {len(rec)}")
            try:
                severity = int(rec[2])
                if multilabel:
                    label = [int(v) for v in rec[3].split("|")]
                    if len(label) != k or any(v not in (0, 1) for v in label):
                        raise ValueError(f"multi-hot target must have {k} entries of 0/1")
                else:
                    label = int(rec[3])
                scores = [float(v) for v in rec[4:]]
            except ValueError as exc:
                raise PredictionTableError(f"{path}:{lineno}: {exc}") from None
            rows.append((rec[0], rec[1], severity, label, scores))
    try:
        return PredictionTable.from_rows(rows)
    except PredictionTableError as exc:
        raise PredictionTableError(f"{path}: {exc}") from None


def write_predictions(path: str | Path, table: PredictionTable) -> None:
    k = table.scores.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["image_id", "corruption", "severity", "true"] + [f"score_{i}" for i in range(k)])
        for i in range(table.n_rows):
            lab = table.labels[i]
            true = "|".join(str(int(v)) for v in lab) if np.ndim(lab) else str(int(lab))
            w.writerow([table.image_id[i], table.corruption[i], int(table.severity[i]), true]
                       + [repr(float(v)) for v in table.scores[i]])
