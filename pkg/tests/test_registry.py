import copy

import pytest
from hypothesis import given
from hypothesis import strategies as st
from corruption_sets import COUNTS, EXPECTED_SETS, TASKS

from medcorrupt.core import CorruptionCategory, ParameterError
from medcorrupt.kernels import KERNELS
from medcorrupt.registry import (
    RegistryError,
    UnknownDatasetError,
    default_config,
    default_registry,
    load_registry,
)


def test_twelve_builtin_profiles(registry):
    assert len(registry.dataset_ids) == 12
    assert set(registry.dataset_ids) == set(EXPECTED_SETS)


@pytest.mark.parametrize("dataset", sorted(EXPECTED_SETS))
def test_corruption_sets_match_the_fixture(registry, dataset):
    assert tuple(registry.corruption_set(dataset)) == EXPECTED_SETS[dataset]
    assert len(registry.corruption_set(dataset)) == COUNTS[dataset]
    profile = registry.profile(dataset)
    assert (profile.task, profile.channels) == TASKS[dataset]


def test_shared_rows(registry):
    assert registry.corruption_set("pathmnist") == registry.corruption_set("bloodmnist")
    organs = {tuple(registry.corruption_set(d)) for d in ("chestmnist", "pneumoniamnist", "organamnist",
                                                          "organcmnist", "organsmnist")}
    assert len(organs) == 1


def test_named_examples(registry):
    assert {"stain_deposit", "bubble"} <= set(registry.corruption_set("pathmnist"))
    assert {"gamma+", "gamma-"} <= set(registry.corruption_set("chestmnist"))
    assert {"black_corner", "characters"} <= set(registry.corruption_set("dermamnist"))
    assert registry.profile("retinamnist").task == "ordinal-as-multiclass"


def test_digital_corruptions_are_universal(registry):
    for d in registry.dataset_ids:
        assert {"jpeg", "pixelate"} <= set(registry.corruption_set(d))


def test_no_rgb_only_corruption_on_grayscale(registry):
    for d in registry.dataset_ids:
        p = registry.profile(d)
        if p.channels == 1:
            assert not any(s.rgb_only for s in p.corruptions)


def test_retina_has_no_task_specific_category(registry):
    assert CorruptionCategory.TASK_SPECIFIC not in registry.profile("retinamnist").categories()
    assert CorruptionCategory.NOISE not in registry.profile("pathmnist").categories()


def test_brightness_endpoints(registry):
    assert registry.param_endpoints("brightness+") == ({"intensity": 1.1}, {"intensity": 1.9})


def test_endpoints_are_the_first_and_last_rows(registry):
    for cid, spec in registry.corruptions.items():
        assert registry.param_endpoints(cid) == (spec.severity_params[0], spec.severity_params[4])


def test_jpeg_quality_is_a_stored_integer(registry):
    q = registry.params_for("jpeg", 3)["quality"]
    assert isinstance(q, int)
    assert load_registry().params_for("jpeg", 3)["quality"] == q


def test_stored_tables_are_monotone_and_in_bounds(registry):
    for spec in registry.corruptions.values():
        assert len(spec.severity_params) == 5
        for name, (lo, hi) in spec.param_bounds.items():
            values = [row[name] for row in spec.severity_params]
            assert all(lo <= v <= hi for v in values)
            steps = [b - a for a, b in zip(values, values[1:])]
            assert all(s >= 0 for s in steps) if spec.direction == "increasing" else all(s <= 0 for s in steps)


def test_dataset_overrides(registry):
    assert registry.params_for("speckle_noise", 1, "octmnist") != registry.params_for("speckle_noise", 1)
    assert registry.params_for("speckle_noise", 1, "chestmnist") == registry.params_for("speckle_noise", 1)


def test_unknown_dataset_lists_valid_names(registry):
    with pytest.raises(UnknownDatasetError) as exc:
        registry.profile("cifar10")
    for d in EXPECTED_SETS:
        assert d in str(exc.value)


def test_bad_severity(registry):
    with pytest.raises(ParameterError):
        registry.params_for("jpeg", 0)


def test_default_registry_is_shared():
    assert default_registry() is default_registry()


def test_digest_is_stable_and_sensitive():
    a, b = load_registry(), load_registry()
    assert a.digest() == b.digest()
    changed = load_registry({"corruptions": {"jpeg": {"params": {"quality": [30, 18, 15, 10, 7]}}}})
    assert changed.digest() != a.digest()


# ---------------------------------------------------------------- config errors


def broken(mutate):
    raw = default_config()
    mutate(raw)
    return raw


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda r: r.pop("version"), "version"),
        (lambda r: r["corruptions"]["jpeg"]["params"].update(quality=[25, 30, 15, 10, 7]), "monotone"),
        (lambda r: r["corruptions"]["jpeg"]["params"].update(quality=[25, 18, 15, 10]), "exactly 5"),
        (lambda r: r["corruptions"]["jpeg"]["params"].update(quality=[250, 18, 15, 10, 7]), "bounds"),
        (lambda r: r["corruptions"]["jpeg"]["params"].update(quality=[10, 10, 10, 10, 10]), "identical"),
        (lambda r: r["corruptions"]["jpeg"].update(category="weather"), "category"),
        (lambda r: r["corruptions"]["jpeg"].update(direction="sideways"), "direction"),
        (lambda r: r["corruptions"]["jpeg"]["params"].update(q=[1, 2, 3, 4, 5]), "params must be"),
        (lambda r: r["corruptions"].update(fog=copy.deepcopy(r["corruptions"]["jpeg"])), "no kernel"),
        (lambda r: r["datasets"]["octmnist"]["corruptions"].append("fog"), "unknown corruption"),
        (lambda r: r["datasets"]["octmnist"]["corruptions"].append("saturate"), "RGB-only"),
        (lambda r: r["datasets"]["octmnist"]["corruptions"].append("jpeg"), "duplicate"),
        (lambda r: r["datasets"]["octmnist"].update(task="segmentation"), "task"),
        (lambda r: r["datasets"]["octmnist"].update(channels=2), "channels"),
        (lambda r: r["datasets"]["octmnist"].update(n_classes=1), "n_classes"),
        (lambda r: r["datasets"]["octmnist"].update(corruptions=[]), "non-empty"),
        (lambda r: r["datasets"]["octmnist"]["params"].update(jpeg={"quality": [1, 2, 3, 4, 5]}), "monotone"),
        (lambda r: r["datasets"]["pathmnist"].setdefault("params", {}).update(gamma_x={}), "does not use"),
    ],
)
def test_invalid_configs_are_rejected(mutate, message):
    with pytest.raises(RegistryError, match=message):
        load_registry(broken(mutate), merge=False)


def test_user_override_file_is_merged_and_validated(tmp_path):
    path = tmp_path / "override.toml"
    path.write_text('[corruptions.jpeg]\nparams = { quality = [40, 30, 20, 12, 8] }\n')
    reg = load_registry(path)
    assert reg.params_for("jpeg", 1) == {"quality": 40}
    assert reg.params_for("pixelate", 1) == default_registry().params_for("pixelate", 1)

    path.write_text('[corruptions.jpeg]\nparams = { quality = [8, 12, 20, 30, 40] }\n')
    with pytest.raises(RegistryError, match="monotone"):
        load_registry(path)


def test_unreadable_config(tmp_path):
    with pytest.raises(RegistryError):
        load_registry(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("version = \n")
    with pytest.raises(RegistryError):
        load_registry(bad)


def test_every_kernel_has_a_default_table(registry):
    assert set(registry.corruptions) == set(KERNELS)


@given(cid=st.sampled_from(sorted(KERNELS)), severity=st.integers(1, 5))
def test_params_for_matches_the_table(cid, severity):
    reg = default_registry()
    spec = reg.spec(cid)
    assert reg.params_for(cid, severity) == spec.severity_params[severity - 1]
    assert set(reg.params_for(cid, severity)) == set(KERNELS[cid].params)
