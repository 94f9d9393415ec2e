"""Training runners: fit on a dataset's train split, export predictions.

Every runner is seed-deterministic, logs its loss curve to a JSON file,
and writes one tensor block per test item (atomically, temp + rename) in
the layout the harness's external method kinds expect.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn.functional as F

from . import data
from .nets import DirectNet, NormalNet, SparseNet, dual_normal_loss


@dataclass
class NetSpec:
    net: str  # direct | normal | sparsenet
    epochs: int = 60
    lr: float = 2e-3
    batch: int = 8
    seed: int = 0
    width: int = 16
    normal_loss: str = "dual"  # dual | xyz (normal net only)

    def __post_init__(self):
        if self.net not in ("direct", "normal", "sparsenet"):
            raise ValueError(f"unknown net {self.net!r}")
        if self.normal_loss not in ("dual", "xyz"):
            raise ValueError(f"unknown normal loss {self.normal_loss!r}")


def _seed_everything(seed: int):
    torch.manual_seed(seed)
    np.random.seed(seed % 2**32)
    torch.use_deterministic_algorithms(True, warn_only=True)


def _resize_image(img: torch.Tensor, side: int) -> torch.Tensor:
    if img.shape[-1] == side:
        return img
    return F.interpolate(img[None], size=(side, side), mode="area")[0]


def _batches(n, batch, generator):
    order = torch.randperm(n, generator=generator)
    for lo in range(0, n, batch):
        yield order[lo : lo + batch]


def _write_log(out_dir, name, spec, curve, extra=None):
    log = {"net": name, "spec": asdict(spec), "loss_curve": curve}
    if extra:
        log.update(extra)
    with open(os.path.join(out_dir, f"{name}_training.json"), "w") as f:
        json.dump(log, f, indent=1, sort_keys=True)
        f.write("\n")


def train_direct(root, spec: NetSpec, out_dir, items=None, eval_items=None):
    """Image -> 32x32 map regression; writes <out_dir>/<item>.tblk per eval item."""
    _seed_everything(spec.seed)
    manifest = data.load_manifest(root)
    res = manifest["rm_resolution"]
    if res != 32:
        raise ValueError(f"direct net emits 32x32 maps; dataset has {res}")
    items = items if items is not None else data.split_items(manifest, "train")
    eval_items = eval_items if eval_items is not None else data.split_items(manifest, "test")
    if not items:
        raise ValueError("no training items")

    images = torch.stack([_resize_image(data.load_image(root, it), 32) for it in items])
    targets = torch.stack([data.load_rm(root, it)[0] for it in items])
    masks = torch.stack([data.load_rm(root, it)[1] for it in items])

    model = DirectNet(width=spec.width)
    model.init_output_bias((targets * masks).sum((0, 2, 3)) / masks.sum())
    opt = torch.optim.Adam(model.parameters(), lr=spec.lr)
    gen = torch.Generator().manual_seed(spec.seed)

    def epoch_loss():
        # full-set loss under training-mode batch statistics: the quantity
        # the optimizer actually drives
        model.train()
        with torch.no_grad():
            pred = model(images)
            return float((((pred - targets) * masks) ** 2).sum() / masks.sum() / 3.0)

    curve = [epoch_loss()]
    for _ in range(spec.epochs):
        model.train()
        for idx in _batches(len(items), spec.batch, gen):
            opt.zero_grad()
            pred = model(images[idx])
            loss = (((pred - targets[idx]) * masks[idx]) ** 2).sum() / masks[idx].sum() / 3.0
            loss.backward()
            opt.step()
        curve.append(epoch_loss())

    os.makedirs(out_dir, exist_ok=True)
    model.eval()
    with torch.no_grad():
        for it in eval_items:
            img = _resize_image(data.load_image(root, it), 32)
            pred = model(img[None])[0].clamp(min=0.0)
            block = pred.permute(1, 2, 0).numpy().astype(np.float32)
            assert np.isfinite(block).all()
            data.write_block_atomic(os.path.join(out_dir, f"{it['id']}.tblk"), block)
    _write_log(out_dir, "direct", spec, curve)
    return model, curve


def train_normal(root, spec: NetSpec, out_dir, items=None, eval_items=None):
    """Image -> half-resolution normals; exports (H/2, W/2, 4) with a mask channel."""
    _seed_everything(spec.seed)
    manifest = data.load_manifest(root)
    items = items if items is not None else data.split_items(manifest, "train")
    eval_items = eval_items if eval_items is not None else data.split_items(manifest, "test")
    if not items:
        raise ValueError("no training items")

    images = torch.stack([data.load_image(root, it) for it in items])
    targets, masks = [], []
    for it in items:
        n, m = data.load_normals(root, it)
        nh, mh = data.half_resolution_normals(n, m)
        targets.append(nh)
        masks.append(mh)
    targets = torch.stack(targets)
    masks = torch.stack(masks)

    model = NormalNet(width=spec.width)
    opt = torch.optim.Adam(model.parameters(), lr=spec.lr)
    gen = torch.Generator().manual_seed(spec.seed)

    def batch_loss(pred, tgt, msk):
        if spec.normal_loss == "dual":
            return dual_normal_loss(pred, tgt, msk)[0]
        diff = (pred - tgt) * msk
        return (diff**2).sum() / msk.sum().clamp(min=1.0)

    curve = []
    for _ in range(spec.epochs):
        model.train()
        for idx in _batches(len(items), spec.batch, gen):
            opt.zero_grad()
            loss = batch_loss(model(images[idx]), targets[idx], masks[idx])
            loss.backward()
            opt.step()
        model.eval()
        with torch.no_grad():
            curve.append(float(batch_loss(model(images), targets, masks)))

    os.makedirs(out_dir, exist_ok=True)
    model.eval()
    with torch.no_grad():
        for it in eval_items:
            img = data.load_image(root, it)
            n, m = data.load_normals(root, it)
            _, mh = data.half_resolution_normals(n, m)
            pred = model(img[None])[0]
            pred[2] = pred[2].abs()  # visible surfaces face the viewer
            lengths = pred.norm(dim=0, keepdim=True).clamp(min=1e-12)
            pred = pred / lengths * mh
            block = torch.cat([pred, mh], dim=0).permute(1, 2, 0).numpy().astype(np.float32)
            assert np.isfinite(block).all()
            data.write_block_atomic(os.path.join(out_dir, f"{it['id']}.tblk"), block)
    _write_log(out_dir, f"normal_{spec.normal_loss}", spec, curve)
    return model, curve


def train_sparsenet(root, spec: NetSpec, out_dir, items=None, eval_items=None):
    """Sparse map (from the harness's --emit-sparse blocks) -> dense map."""
    _seed_everything(spec.seed)
    manifest = data.load_manifest(root)
    res = manifest["rm_resolution"]
    items = items if items is not None else data.split_items(manifest, "train")
    eval_items = eval_items if eval_items is not None else data.split_items(manifest, "test")
    if not items:
        raise ValueError("no training items")

    inputs = torch.stack([data.load_sparse_block(root, it) for it in items])
    if inputs.shape[-1] != res:
        raise ValueError(f"sparse blocks are {inputs.shape[-1]}, dataset maps are {res}")
    targets = torch.stack([data.load_rm(root, it)[0] for it in items])
    masks = torch.stack([data.load_rm(root, it)[1] for it in items])

    model = SparseNet(width=spec.width)
    opt = torch.optim.Adam(model.parameters(), lr=spec.lr)
    gen = torch.Generator().manual_seed(spec.seed)

    def epoch_loss():
        model.eval()
        with torch.no_grad():
            pred = model(inputs)
            return float((((pred - targets) * masks) ** 2).sum() / masks.sum() / 3.0)

    curve = [epoch_loss()]
    for _ in range(spec.epochs):
        model.train()
        for idx in _batches(len(items), spec.batch, gen):
            opt.zero_grad()
            pred = model(inputs[idx])
            loss = (((pred - targets[idx]) * masks[idx]) ** 2).sum() / masks[idx].sum() / 3.0
            loss.backward()
            opt.step()
        curve.append(epoch_loss())

    os.makedirs(out_dir, exist_ok=True)
    model.eval()
    with torch.no_grad():
        for it in eval_items:
            block_in = data.load_sparse_block(root, it)
            pred = model(block_in[None])[0].clamp(min=0.0)
            block = pred.permute(1, 2, 0).numpy().astype(np.float32)
            assert np.isfinite(block).all()
            data.write_block_atomic(os.path.join(out_dir, f"{it['id']}.tblk"), block)
    _write_log(out_dir, "sparsenet", spec, curve)
    return model, curve
