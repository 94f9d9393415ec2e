"""Synthetic dataset generation and manifest I/O.

Every item pairs a procedural shape (random rotation about y), a
material and an environment map, renders the ground-truth reflectance
map by hemispherical integration, shades the normal map from it, and
applies key-parameter exposure. Shapes, materials and illuminations are
partitioned disjointly between the train and test splits. All
randomness derives from (master seed, item index) streams, so a
configuration reproduces its tree byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from . import pfm
from .brdf import BlinnPhong, Lambert, load_merl
from .core import NormalMap, RadianceImage, ReflectanceMap, shade_from_normals
from .envmap import EnvironmentMap, load_envmap, texel_to_direction
from .render import (
    Sphere,
    Superellipsoid,
    Torus,
    blob_shadow_factors,
    brdf_convolve,
    log_average_luminance,
    procedural_normals,
    reinhard_tonemap,
    tonemap_map,
)

MANIFEST_NAME = "manifest.json"


@dataclass
class AssetRegistry:
    shapes: dict
    materials: dict
    envs: dict

    def validate_for_split(self):
        for axis, pool in (("shapes", self.shapes), ("materials", self.materials), ("envs", self.envs)):
            if len(pool) < 2:
                raise ValueError(
                    f"insufficient assets: need at least 2 {axis} for a disjoint split, have {len(pool)}"
                )


def procedural_env(seed: int, width: int = 32, height: int = 16, n_blobs: int = 3) -> EnvironmentMap:
    """Smooth seeded illumination: ambient plus a few directional lobes and one hot texel."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7,)))
    v, u = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    dirs = texel_to_direction(v, u, width, height)
    radiance = np.full((height, width, 3), 0.05 + 0.1 * rng.random())
    for _ in range(n_blobs):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        color = 0.2 + 1.3 * rng.random(3)
        sharp = 2.0 ** rng.uniform(0.5, 4.0)
        lobe = np.clip(dirs @ axis, 0.0, None) ** sharp
        radiance += lobe[..., None] * color
    hot_v, hot_u = rng.integers(0, height), rng.integers(0, width)
    radiance[hot_v, hot_u] += 4.0 + 8.0 * rng.random(3)
    return EnvironmentMap(radiance)


def builtin_registry(n_envs: int = 4, env_seed: int = 100, env_size: int = 32) -> AssetRegistry:
    shapes = {
        "sphere": Sphere(),
        "torus-fat": Torus(minor=0.25, major=0.6),
        "torus-thin": Torus(minor=0.12, major=0.7),
        "box-soft": Superellipsoid(e1=0.4, e2=0.4),
        "pillow": Superellipsoid(e1=1.0, e2=0.4),
        "rounded": Superellipsoid(e1=1.6, e2=1.6),
    }
    materials = {
        "lambert-red": Lambert((0.7, 0.2, 0.15)),
        "lambert-blue": Lambert((0.15, 0.25, 0.7)),
        "lambert-gray": Lambert((0.5, 0.5, 0.5)),
        "gloss-low": BlinnPhong((0.35, 0.3, 0.25), (0.4, 0.4, 0.4), 24.0),
        "gloss-high": BlinnPhong((0.2, 0.22, 0.25), (0.55, 0.55, 0.55), 180.0),
        "mirrorish": BlinnPhong((0.05, 0.05, 0.05), (0.75, 0.75, 0.75), 600.0),
    }
    envs = {
        f"env-{k:02d}": procedural_env(env_seed + k, width=env_size, height=env_size // 2)
        for k in range(n_envs)
    }
    return AssetRegistry(shapes, materials, envs)


def load_registry(asset_dir, n_envs: int = 4, env_seed: int = 100) -> AssetRegistry:
    """Builtin procedural assets plus any measured BRDFs / HDR maps on disk."""
    reg = builtin_registry(n_envs=n_envs, env_seed=env_seed)
    if asset_dir is None:
        return reg
    asset_dir = os.fspath(asset_dir)
    if not os.path.isdir(asset_dir):
        raise FileNotFoundError(f"asset directory not found: {asset_dir}")
    brdf_dir = os.path.join(asset_dir, "brdfs")
    if os.path.isdir(brdf_dir):
        for name in sorted(os.listdir(brdf_dir)):
            if name.endswith(".binary"):
                reg.materials[f"merl-{name[:-7]}"] = load_merl(os.path.join(brdf_dir, name))
    env_dir = os.path.join(asset_dir, "envmaps")
    if os.path.isdir(env_dir):
        for name in sorted(os.listdir(env_dir)):
            if name.endswith(".hdr"):
                reg.envs[f"hdr-{name[:-4]}"] = load_envmap(os.path.join(env_dir, name))
    return reg


@dataclass
class SynthConfig:
    samples: int = 500
    seed: int = 0
    rm_resolution: int = 32
    image_size: int = 96
    mc_samples: int = 1024
    split_fraction: float = 0.5
    shadow: bool = True
    shadow_darken: float = 0.4
    assets: str | None = None
    env_count: int = 4
    env_seed: int = 100

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must lie in (0, 1)")


@dataclass
class DatasetItem:
    id: str
    split: str
    shape: str
    material: str
    env: str
    rotation_y: float
    key: float
    mc_seed: int
    log_avg: float
    paths: dict


def _split_pool(ids, fraction: float, rng: np.random.Generator):
    ids = sorted(ids)
    perm = rng.permutation(len(ids))
    cut = max(1, min(len(ids) - 1, round(fraction * len(ids))))
    train = sorted(ids[i] for i in perm[:cut])
    test = sorted(ids[i] for i in perm[cut:])
    return train, test


def _item_paths(item_id: str) -> dict:
    base = f"items/{item_id}"
    return {
        "rm_linear": f"{base}/rm_linear.pfm",
        "rm_display": f"{base}/rm_display.pfm",
        "normals": f"{base}/normals.pfm",
        "image_linear": f"{base}/image_linear.pfm",
        "image_display": f"{base}/image_display.pfm",
        "image_shadowed": f"{base}/image_shadowed.pfm",
        "shadow_factors": f"{base}/shadow_factors.pfm",
    }


def generate_dataset(config: SynthConfig, out_dir, registry: AssetRegistry | None = None) -> dict:
    """Render the configured dataset under out_dir and return its manifest."""
    if registry is None:
        registry = load_registry(config.assets, n_envs=config.env_count, env_seed=config.env_seed)
    registry.validate_for_split()

    split_rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(0,)))
    shape_tr, shape_te = _split_pool(registry.shapes, config.split_fraction, split_rng)
    mat_tr, mat_te = _split_pool(registry.materials, config.split_fraction, split_rng)
    env_tr, env_te = _split_pool(registry.envs, config.split_fraction, split_rng)
    pools = {
        "train": (shape_tr, mat_tr, env_tr),
        "test": (shape_te, mat_te, env_te),
    }

    os.makedirs(os.path.join(out_dir, "items"), exist_ok=True)
    n_train = round(config.split_fraction * config.samples)

    rm_cache: dict = {}
    items = []
    for i in range(config.samples):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(1, i)))
        split = "train" if i < n_train else "test"
        shapes, mats, envs = pools[split]
        item = DatasetItem(
            id=f"item_{i:05d}",
            split=split,
            shape=shapes[rng.integers(len(shapes))],
            material=mats[rng.integers(len(mats))],
            env=envs[rng.integers(len(envs))],
            rotation_y=float(rng.uniform(0.0, 360.0)),
            key=float(rng.uniform(0.4, 0.6)),
            mc_seed=0,
            log_avg=0.0,
            paths=_item_paths(f"item_{i:05d}"),
        )
        # the ground-truth map depends on (material, env) only; derive its
        # seed from those ids so repeats hit the cache (blake2b, not the
        # process-salted builtin hash, keeps reruns byte-identical)
        pair_key = hashlib.blake2b(
            f"{item.material}|{item.env}".encode(), digest_size=4
        ).digest()
        item.mc_seed = int(
            np.random.SeedSequence(
                entropy=config.seed, spawn_key=(2, int.from_bytes(pair_key, "little"))
            ).generate_state(1)[0]
        )

        cache_key = (item.material, item.env)
        if cache_key not in rm_cache:
            rm = brdf_convolve(
                registry.envs[item.env],
                registry.materials[item.material],
                resolution=config.rm_resolution,
                n_samples=config.mc_samples,
                seed=item.mc_seed,
            )
            # quantize to storage precision before shading, so the stored
            # image is bit-exactly shade_from_normals(normals, stored map)
            rm_cache[cache_key] = ReflectanceMap(
                rm.radiance.astype(np.float32).astype(np.float64), rm.defined
            )
        rm_linear = rm_cache[cache_key]

        nm_exact = procedural_normals(registry.shapes[item.shape], item.rotation_y, config.image_size)
        # shade with the normals as readers will reconstruct them, keeping
        # the stored image bit-identical to a re-shade from stored files
        nm = storage_normals(nm_exact.normals, nm_exact.mask)
        img_linear = shade_from_normals(nm, rm_linear)
        item.log_avg = log_average_luminance(img_linear)
        img_display = reinhard_tonemap(img_linear, item.key)
        rm_display = tonemap_map(rm_linear, item.key, item.log_avg) if item.log_avg > 0 else rm_linear

        item_dir = os.path.join(out_dir, "items", item.id)
        os.makedirs(item_dir, exist_ok=True)
        root = os.fspath(out_dir)
        pfm.write_masked(os.path.join(root, item.paths["rm_linear"]), rm_linear.radiance, rm_linear.defined)
        pfm.write_masked(os.path.join(root, item.paths["rm_display"]), rm_display.radiance, rm_display.defined)
        # store the raw float32 cast of the exact normals; readers renormalize
        pfm.write_masked(os.path.join(root, item.paths["normals"]), nm_exact.normals, nm_exact.mask)
        pfm.write_masked(os.path.join(root, item.paths["image_linear"]), img_linear.rgb, img_linear.mask)
        pfm.write_masked(os.path.join(root, item.paths["image_display"]), img_display.rgb, img_display.mask)
        if config.shadow:
            factors = blob_shadow_factors(
                config.image_size, config.image_size, rng, darken=config.shadow_darken
            )
            shadowed = img_display.rgb * factors[..., None]
            pfm.write_masked(os.path.join(root, item.paths["image_shadowed"]), shadowed, img_display.mask)
            pfm.write_pfm(os.path.join(root, item.paths["shadow_factors"]), factors)
        else:
            item.paths.pop("image_shadowed")
            item.paths.pop("shadow_factors")

        items.append(item)

    manifest = {
        "config": asdict(config),
        "rm_resolution": config.rm_resolution,
        "splits": {
            "train": {"shapes": shape_tr, "materials": mat_tr, "envs": env_tr},
            "test": {"shapes": shape_te, "materials": mat_te, "envs": env_te},
        },
        "items": [asdict(it) for it in items],
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return manifest


def load_manifest(root) -> dict:
    path = os.path.join(root, MANIFEST_NAME)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no manifest at {path}")
    with open(path) as f:
        return json.load(f)


def item_rm(root, item: dict, which: str = "display") -> ReflectanceMap:
    data, mask = pfm.read_masked(os.path.join(root, item["paths"][f"rm_{which}"]))
    return ReflectanceMap(data, mask)


def storage_normals(raw: np.ndarray, mask: np.ndarray) -> NormalMap:
    """Normals exactly as a reader reconstructs them from float32 storage."""
    data = np.asarray(raw, dtype=np.float32).astype(np.float64)
    lengths = np.linalg.norm(data, axis=-1, keepdims=True)
    data = np.where(mask[..., None] & (lengths > 0), data / np.where(lengths > 0, lengths, 1.0), 0.0)
    return NormalMap(data, mask)


def item_normals(root, item: dict) -> NormalMap:
    data, mask = pfm.read_masked(os.path.join(root, item["paths"]["normals"]))
    return storage_normals(data, mask)


def item_image(root, item: dict, which: str = "display") -> RadianceImage:
    data, mask = pfm.read_masked(os.path.join(root, item["paths"][f"image_{which}"]))
    return RadianceImage(np.clip(data, 0.0, None), mask)
