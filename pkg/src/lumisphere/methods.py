"""Reconstruction method registry.

A method spec names one way to produce a reflectance map for a dataset
item: ground truth passthrough, the indirect pipeline with RBF
interpolation (Eq-style scattered data reconstruction on all samples),
the max-pooled sparse map densified by RBF, a spherical-harmonics
projection of the ground truth, or external predictions read from
tensor-block files. External kinds never fall back: a missing file is a
per-item error.
"""

from __future__ import annotations

import os
import shutil
from dataclasses import dataclass, field

import numpy as np

from . import pfm
from .core import NormalMap, ReflectanceMap, disc_mask
from .dataset import item_image, item_normals, item_rm
from .domain import (
    DEFAULT_EPS_DEG,
    DEFAULT_RBF_SIGMA,
    DEFAULT_SH_ORDER,
    collect_samples,
    densify,
    rbf_reconstruct,
    scatter_max,
    sh_project,
    sh_reconstruct,
)
from .tensorblock import read_tensor_block, write_tensor_block
from .upsample import UpsampleParams, joint_upsample

KINDS = ("gt", "indirect_rbf", "indirect_sparse_external", "direct_external", "sh", "gt_normals")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    kind: str
    sigma: float = DEFAULT_RBF_SIGMA
    sh_order: int = DEFAULT_SH_ORDER
    eps_deg: float = DEFAULT_EPS_DEG
    image: str = "display"  # which rendered image feeds the pipeline
    normals: str = "gt"  # "gt" or a directory of external normal tensor blocks
    predictions: str | None = None  # tensor-block directory for external kinds

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown method kind {self.kind!r} (choose from {KINDS})")
        if self.kind.endswith("external") and not self.predictions:
            raise ValueError(f"method kind {self.kind} requires predictions=<dir>")
        if self.sigma <= 0 or self.eps_deg <= 0 or self.sh_order < 0:
            raise ValueError("method parameters out of range")
        if self.image not in ("display", "linear"):
            raise ValueError("image must be 'display' or 'linear'")


def parse_method(text: str) -> MethodSpec:
    """Parse 'kind' or 'name:kind[,key=value...]' from the command line."""
    head, _, tail = text.partition(":")
    if tail:
        name, rest = head, tail
    else:
        name, rest = head, head
    parts = rest.split(",")
    kind = parts[0]
    kwargs = {}
    for part in parts[1:]:
        k, _, v = part.partition("=")
        if k in ("sigma", "eps_deg"):
            kwargs[k] = float(v)
        elif k == "sh_order":
            kwargs[k] = int(v)
        elif k in ("image", "normals", "predictions"):
            kwargs[k] = v
        else:
            raise ValueError(f"unknown method parameter {k!r}")
    return MethodSpec(name=name, kind=kind, **kwargs)


def _external_normals(spec: MethodSpec, item: dict, guide) -> NormalMap:
    path = os.path.join(spec.normals, f"{item['id']}.tblk")
    data = read_tensor_block(path)
    if data.ndim != 3 or data.shape[2] != 4:
        raise ValueError(f"{path}: normals tensor must be (H, W, 4) with a mask channel")
    mask = data[..., 3] > 0.5
    vecs = data[..., :3].astype(np.float64)
    lengths = np.linalg.norm(vecs, axis=-1, keepdims=True)
    vecs = np.where(mask[..., None] & (lengths > 1e-9), vecs / np.where(lengths > 0, lengths, 1.0), 0.0)
    vecs[..., 2] = np.clip(vecs[..., 2], 0.0, None)
    lengths = np.linalg.norm(vecs, axis=-1, keepdims=True)
    vecs = np.where(mask[..., None] & (lengths > 1e-9), vecs / np.where(lengths > 0, lengths, 1.0), 0.0)
    nm = NormalMap(vecs, mask)
    if (nm.height, nm.width) != (guide.height, guide.width):
        nm = joint_upsample(nm, guide, UpsampleParams.for_scale(guide.height / nm.height))
    return nm


def _pipeline_normals(spec: MethodSpec, root, item: dict, guide) -> NormalMap:
    if spec.normals == "gt":
        return item_normals(root, item)
    return _external_normals(spec, item, guide)


def reconstruct_item(root, item: dict, spec: MethodSpec, resolution: int) -> ReflectanceMap:
    """Predict one item's reflectance map according to the method spec."""
    if spec.kind == "gt":
        return item_rm(root, item, spec.image)

    if spec.kind == "sh":
        gt = item_rm(root, item, spec.image)
        return sh_reconstruct(sh_project(gt, spec.sh_order), resolution)

    if spec.kind == "direct_external":
        path = os.path.join(spec.predictions, f"{item['id']}.tblk")
        data = read_tensor_block(path)
        if data.shape != (resolution, resolution, 3):
            raise ValueError(
                f"{path}: prediction shape {data.shape} != {(resolution, resolution, 3)}"
            )
        mask = disc_mask(resolution)
        return ReflectanceMap(np.where(mask[..., None], np.clip(data, 0, None), 0.0), mask)

    img = item_image(root, item, spec.image)
    nm = _pipeline_normals(spec, root, item, img)
    samples = collect_samples(img, nm)

    if spec.kind == "indirect_rbf":
        return rbf_reconstruct(samples, sigma=spec.sigma, resolution=resolution)

    sparse = scatter_max(samples, resolution, eps_deg=spec.eps_deg)
    if spec.kind == "gt_normals":
        return densify(sparse, method="rbf", sigma=spec.sigma)
    if spec.kind == "indirect_sparse_external":
        return densify(
            sparse,
            method="external",
            prediction_path=os.path.join(spec.predictions, f"{item['id']}.tblk"),
        )
    raise AssertionError(f"unhandled kind {spec.kind}")


def prediction_dir(root, spec: MethodSpec) -> str:
    return os.path.join(root, "predictions", spec.name)


def run_reconstruct(root, manifest: dict, spec: MethodSpec, emit_sparse: bool = False):
    """Reconstruct every item; returns (written paths, per-item errors).

    With emit_sparse, also writes the max-pooled sparse maps (RGB plus a
    definedness channel) as tensor blocks for training sparse densifiers.
    """
    res = manifest["rm_resolution"]
    out_dir = prediction_dir(root, spec)
    os.makedirs(out_dir, exist_ok=True)
    sparse_dir = os.path.join(root, "sparse")
    if emit_sparse:
        os.makedirs(sparse_dir, exist_ok=True)

    written, errors = [], []
    for item in manifest["items"]:
        try:
            if spec.kind == "gt":
                # byte-for-byte passthrough of the stored ground truth
                src = os.path.join(root, item["paths"][f"rm_{spec.image}"])
                dst = os.path.join(out_dir, f"{item['id']}.pfm")
                shutil.copyfile(src, dst)
                shutil.copyfile(pfm.mask_path(src), pfm.mask_path(dst))
            else:
                rm = reconstruct_item(root, item, spec, res)
                dst = os.path.join(out_dir, f"{item['id']}.pfm")
                pfm.write_masked(dst, rm.radiance, rm.defined)
            if emit_sparse:
                img = item_image(root, item, spec.image)
                nm = item_normals(root, item)
                sparse = scatter_max(collect_samples(img, nm), res, eps_deg=spec.eps_deg)
                block = np.concatenate(
                    [sparse.radiance, sparse.defined[..., None].astype(np.float64)], axis=-1
                )
                write_tensor_block(os.path.join(sparse_dir, f"{item['id']}.tblk"), block)
            written.append(dst)
        except (OSError, ValueError) as e:
            errors.append((item["id"], str(e)))
    return written, errors


def load_prediction(root, spec_name: str, item: dict) -> ReflectanceMap:
    path = os.path.join(root, "predictions", spec_name, f"{item['id']}.pfm")
    data, mask = pfm.read_masked(path)
    return ReflectanceMap(np.clip(data, 0.0, None), mask)
