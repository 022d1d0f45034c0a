"""Dataset profiles and per-severity hyperparameter tables, loaded from TOML.

The built-in table ships as ``default_registry.toml``. A user file given to
:func:`load_registry` is deep-merged over it and validated by the same rules,
so an override only needs the keys it changes.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import SEVERITIES, CorruptionCategory, MedCorruptError, check_severity
from .kernels import KERNELS, UnknownCorruptionError

TASKS = ("binary", "multiclass", "multilabel", "ordinal-as-multiclass")
DIRECTIONS = ("increasing", "decreasing")


class RegistryError(MedCorruptError, ValueError):
    """The registry config violates the schema or a table invariant."""


class UnknownDatasetError(MedCorruptError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class CorruptionSpec:
    corruption_id: str
    category: CorruptionCategory
    severity_params: tuple[dict, ...]
    param_bounds: Mapping[str, tuple[float, float]]
    direction: str
    stochastic: bool
    rgb_only: bool

    def params(self, severity: int) -> dict:
        return dict(self.severity_params[check_severity(severity) - 1])

    def table(self) -> dict[str, list]:
        """Column view: scalar name -> five values."""
        names = self.severity_params[0].keys()
        return {n: [p[n] for p in self.severity_params] for n in names}


@dataclass(frozen=True)
class DatasetProfile:
    dataset_id: str
    task: str
    channels: int
    n_classes: int
    corruptions: tuple[CorruptionSpec, ...]

    @property
    def corruption_ids(self) -> tuple[str, ...]:
        return tuple(c.corruption_id for c in self.corruptions)

    def spec(self, corruption_id: str) -> CorruptionSpec:
        for c in self.corruptions:
            if c.corruption_id == corruption_id:
                return c
        raise UnknownCorruptionError(f"{corruption_id!r} is not part of {self.dataset_id}")

    def categories(self) -> dict[CorruptionCategory, tuple[str, ...]]:
        out: dict[CorruptionCategory, list[str]] = {}
        for c in self.corruptions:
            out.setdefault(c.category, []).append(c.corruption_id)
        return {cat: tuple(out[cat]) for cat in CorruptionCategory if cat in out}


@dataclass(frozen=True)
class Registry:
    version: str
    corruptions: Mapping[str, CorruptionSpec]
    profiles: Mapping[str, DatasetProfile]

    @property
    def dataset_ids(self) -> tuple[str, ...]:
        return tuple(self.profiles)

    def profile(self, dataset_id: str) -> DatasetProfile:
        try:
            return self.profiles[dataset_id]
        except KeyError:
            raise UnknownDatasetError(
                f"unknown dataset {dataset_id!r}; valid ids: {', '.join(self.profiles)}"
            ) from None

    def corruption_set(self, dataset_id: str) -> list[str]:
        return list(self.profile(dataset_id).corruption_ids)

    def spec(self, corruption_id: str, dataset_id: str | None = None) -> CorruptionSpec:
        if dataset_id is not None:
            return self.profile(dataset_id).spec(corruption_id)
        try:
            return self.corruptions[corruption_id]
        except KeyError:
            raise UnknownCorruptionError(f"unknown corruption {corruption_id!r}") from None

    def params_for(self, corruption_id: str, severity: int, dataset_id: str | None = None) -> dict:
        return self.spec(corruption_id, dataset_id).params(severity)

    def param_endpoints(self, corruption_id: str, dataset_id: str | None = None) -> tuple[dict, dict]:
        spec = self.spec(corruption_id, dataset_id)
        return dict(spec.severity_params[0]), dict(spec.severity_params[-1])

    def tables_for(self, dataset_id: str) -> dict:
        """JSON-ready parameter tables of one dataset, as written into manifests."""
        return {
            c.corruption_id: {"category": c.category.value, "params": c.table()}
            for c in self.profile(dataset_id).corruptions
        }

    def digest(self) -> str:
        payload = {
            "version": self.version,
            "corruptions": {k: {"category": v.category.value, "params": v.table()} for k, v in self.corruptions.items()},
            "datasets": {d: self.tables_for(d) for d in self.profiles},
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def default_config() -> dict:
    text = resources.files("medcorrupt").joinpath("default_registry.toml").read_text(encoding="utf-8")
    return tomllib.loads(text)


def _merge(base: dict, override: Mapping) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_registry(config: str | Path | Mapping | None = None, *, merge: bool = True) -> Registry:
    """Build a validated :class:`Registry`.

    ``config`` may be a path to a TOML file, an already-parsed mapping, or
    None for the built-in table. With ``merge=False`` the given config must
    be complete on its own.
    """
    if config is None:
        raw = default_config()
    else:
        if isinstance(config, Mapping):
            user = dict(config)
        else:
            try:
                user = tomllib.loads(Path(config).read_text(encoding="utf-8"))
            except (OSError, tomllib.TOMLDecodeError) as exc:
                raise RegistryError(f"cannot read registry config {config}: {exc}") from exc
        raw = _merge(default_config(), user) if merge else user
    return _build(raw)


def _build(raw: Mapping) -> Registry:
    version = raw.get("version")
    if not isinstance(version, str) or not version:
        raise RegistryError("registry config needs a non-empty string `version`")
    corruptions_raw = raw.get("corruptions")
    datasets_raw = raw.get("datasets")
    if not isinstance(corruptions_raw, Mapping) or not isinstance(datasets_raw, Mapping):
        raise RegistryError("registry config needs [corruptions] and [datasets] tables")

    corruptions = {cid: _build_spec(cid, entry) for cid, entry in corruptions_raw.items()}
    profiles = {did: _build_profile(did, entry, corruptions) for did, entry in datasets_raw.items()}
    return Registry(version, corruptions, profiles)


def _build_spec(cid: str, entry: Mapping, params_override: Mapping | None = None) -> CorruptionSpec:
    where = f"corruption {cid!r}"
    if cid not in KERNELS:
        raise RegistryError(f"{where}: no kernel implements this id")
    kernel = KERNELS[cid]
    try:
        category = CorruptionCategory(entry["category"])
    except (KeyError, ValueError):
        raise RegistryError(f"{where}: category must be one of {[c.value for c in CorruptionCategory]}") from None
    direction = entry.get("direction")
    if direction not in DIRECTIONS:
        raise RegistryError(f"{where}: direction must be one of {DIRECTIONS}")
    columns = dict(entry.get("params", {}))
    if params_override:
        columns.update(params_override)
    if set(columns) != set(kernel.params):
        raise RegistryError(f"{where}: params must be exactly {sorted(kernel.params)}, got {sorted(columns)}")
    bounds_raw = entry.get("bounds", {})
    bounds = {}
    for name in kernel.params:
        b = bounds_raw.get(name)
        if not (isinstance(b, list) and len(b) == 2 and b[0] <= b[1]):
            raise RegistryError(f"{where}: bounds.{name} must be [low, high]")
        bounds[name] = (b[0], b[1])

    moving = False
    for name in kernel.params:
        values = columns[name]
        if not isinstance(values, list) or len(values) != len(SEVERITIES):
            raise RegistryError(f"{where}: params.{name} needs exactly 5 values, one per severity")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in values):
            raise RegistryError(f"{where}: params.{name} must be numeric")
        if any(isinstance(v, float) for v in values) and any(isinstance(v, int) for v in values):
            values = [float(v) for v in values]
            columns[name] = values
        lo, hi = bounds[name]
        if any(v < lo or v > hi for v in values):
            raise RegistryError(f"{where}: params.{name}={values} leaves bounds [{lo}, {hi}]")
        steps = [b - a for a, b in zip(values, values[1:])]
        ok = all(s >= 0 for s in steps) if direction == "increasing" else all(s <= 0 for s in steps)
        if not ok:
            raise RegistryError(f"{where}: params.{name}={values} is not monotone {direction} in severity")
        moving = moving or values[0] != values[-1]
    if not moving:
        raise RegistryError(f"{where}: severity 1 and 5 use identical parameters")

    rows = tuple({name: columns[name][i] for name in kernel.params} for i in range(len(SEVERITIES)))
    return CorruptionSpec(cid, category, rows, bounds, direction, kernel.stochastic, kernel.rgb_only)


def _build_profile(did: str, entry: Mapping, corruptions: Mapping[str, CorruptionSpec]) -> DatasetProfile:
    where = f"dataset {did!r}"
    task = entry.get("task")
    if task not in TASKS:
        raise RegistryError(f"{where}: task must be one of {TASKS}")
    channels = entry.get("channels")
    if channels not in (1, 3):
        raise RegistryError(f"{where}: channels must be 1 or 3")
    n_classes = entry.get("n_classes")
    min_classes = 1 if task == "multilabel" else 2
    if isinstance(n_classes, bool) or not isinstance(n_classes, int) or n_classes < min_classes:
        raise RegistryError(f"{where}: n_classes must be an integer >= 2 (>= 1 for multilabel)")
    ids = entry.get("corruptions")
    if not isinstance(ids, list) or not ids:
        raise RegistryError(f"{where}: corruptions must be a non-empty list")
    if len(set(ids)) != len(ids):
        raise RegistryError(f"{where}: duplicate corruption ids")
    overrides = entry.get("params", {})
    stray = set(overrides) - set(ids)
    if stray:
        raise RegistryError(f"{where}: parameter overrides for corruptions it does not use: {sorted(stray)}")

    specs = []
    for cid in ids:
        if cid not in corruptions:
            raise RegistryError(f"{where}: unknown corruption id {cid!r}")
        spec = corruptions[cid]
        if spec.rgb_only and channels != 3:
            raise RegistryError(f"{where}: RGB-only corruption {cid!r} assigned to a 1-channel dataset")
        if cid in overrides:
            base = {
                "category": spec.category.value,
                "direction": spec.direction,
                "bounds": {k: list(v) for k, v in spec.param_bounds.items()},
                "params": spec.table(),
            }
            spec = _build_spec(cid, base, overrides[cid])
        specs.append(spec)
    return DatasetProfile(did, task, channels, n_classes, tuple(specs))


_DEFAULT: Registry | None = None


def default_registry() -> Registry:
    """The built-in registry, loaded once and shared (it is immutable)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_registry()
    return _DEFAULT
