"""Dataset generation: splits, determinism, self-consistency."""

import hashlib
import json
import os

import numpy as np
import pytest

from lumisphere import pfm
from lumisphere.core import shade_from_normals
from lumisphere.dataset import (
    AssetRegistry,
    SynthConfig,
    builtin_registry,
    generate_dataset,
    item_image,
    item_normals,
    item_rm,
    load_manifest,
)

TINY = dict(samples=4, image_size=32, mc_samples=64, rm_resolution=16, env_count=2)


def tree_hashes(root):
    out = {}
    for base, _, files in os.walk(root):
        for name in files:
            path = os.path.join(base, name)
            rel = os.path.relpath(path, root)
            with open(path, "rb") as f:
                out[rel] = hashlib.sha256(f.read()).hexdigest()
    return out


def test_split_is_disjoint_on_all_axes(tmp_path):
    manifest = generate_dataset(SynthConfig(seed=1, **TINY), tmp_path)
    for axis in ("shapes", "materials", "envs"):
        train = set(manifest["splits"]["train"][axis])
        test = set(manifest["splits"]["test"][axis])
        assert train and test and not (train & test)
    for item in manifest["items"]:
        pool = manifest["splits"][item["split"]]
        assert item["shape"] in pool["shapes"]
        assert item["material"] in pool["materials"]
        assert item["env"] in pool["envs"]


def test_item_count_matches_config(tmp_path):
    manifest = generate_dataset(SynthConfig(seed=2, **TINY), tmp_path)
    assert len(manifest["items"]) == TINY["samples"]


def test_determinism_byte_identical_trees(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    generate_dataset(SynthConfig(seed=3, **TINY), a)
    generate_dataset(SynthConfig(seed=3, **TINY), b)
    ha, hb = tree_hashes(a), tree_hashes(b)
    assert ha == hb


def test_different_seed_changes_tree(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    generate_dataset(SynthConfig(seed=3, **TINY), a)
    generate_dataset(SynthConfig(seed=4, **TINY), b)
    assert tree_hashes(a) != tree_hashes(b)


def test_shaded_image_is_shade_from_normals(tmp_path):
    root = tmp_path
    manifest = generate_dataset(SynthConfig(seed=5, **TINY), root)
    item = manifest["items"][0]
    rm = item_rm(root, item, "linear")
    nm = item_normals(root, item)
    recomputed = shade_from_normals(nm, rm).rgb.astype(np.float32)
    stored = pfm.read_pfm(os.path.join(root, item["paths"]["image_linear"]))
    assert np.array_equal(stored, recomputed)


def test_shadow_augmentation_only_darkens(tmp_path):
    manifest = generate_dataset(SynthConfig(seed=6, **TINY), tmp_path)
    for item in manifest["items"]:
        clean = pfm.read_pfm(os.path.join(tmp_path, item["paths"]["image_display"]))
        dark = pfm.read_pfm(os.path.join(tmp_path, item["paths"]["image_shadowed"]))
        assert (dark <= clean + 1e-7).all()


def test_display_image_in_unit_range(tmp_path):
    manifest = generate_dataset(SynthConfig(seed=7, **TINY), tmp_path)
    item = manifest["items"][0]
    img = item_image(tmp_path, item, "display")
    assert img.rgb[img.mask].max() < 1.0


def test_insufficient_assets_rejected(tmp_path):
    reg = builtin_registry(n_envs=2)
    reg.materials = {"only-one": reg.materials["lambert-gray"]}
    with pytest.raises(ValueError, match="insufficient assets"):
        generate_dataset(SynthConfig(seed=8, **TINY), tmp_path, registry=reg)


def test_manifest_round_trips(tmp_path):
    generate_dataset(SynthConfig(seed=9, **TINY), tmp_path)
    manifest = load_manifest(tmp_path)
    assert {it["split"] for it in manifest["items"]} <= {"train", "test"}
    with open(os.path.join(tmp_path, "manifest.json")) as f:
        assert json.load(f) == manifest
