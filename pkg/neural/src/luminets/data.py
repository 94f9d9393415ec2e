"""Dataset access for training: manifests, PFM files, tensor blocks.

Everything crosses the package boundary as files; the only shared code
is the format readers. Images come back as (3, H, W) float32 tensors,
normals as (3, H, W) with a (1, H, W) mask, maps as (3, R, R) with a
definedness channel available.
"""

from __future__ import annotations

import json
import os

import numpy as np
import torch

from lumisphere.pfm import read_masked
from lumisphere.tensorblock import read_tensor_block, write_tensor_block


def load_manifest(root):
    with open(os.path.join(root, "manifest.json")) as f:
        return json.load(f)


def split_items(manifest, split):
    return [it for it in manifest["items"] if it["split"] == split]


def _chw(data: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(data.transpose(2, 0, 1))).float()


def load_image(root, item, which="display") -> torch.Tensor:
    data, mask = read_masked(os.path.join(root, item["paths"][f"image_{which}"]))
    return _chw(data * mask[..., None])


def load_rm(root, item, which="display"):
    data, mask = read_masked(os.path.join(root, item["paths"][f"rm_{which}"]))
    return _chw(data * mask[..., None]), torch.from_numpy(mask[None].copy()).float()


def load_normals(root, item):
    data, mask = read_masked(os.path.join(root, item["paths"]["normals"]))
    lengths = np.linalg.norm(data, axis=-1, keepdims=True)
    data = np.where(mask[..., None] & (lengths > 0), data / np.where(lengths > 0, lengths, 1.0), 0.0)
    return _chw(data), torch.from_numpy(mask[None].copy()).float()


def load_sparse_block(root, item) -> torch.Tensor:
    """Sparse map written by the harness: (R, R, 4) rgb + definedness."""
    path = os.path.join(root, "sparse", f"{item['id']}.tblk")
    return _chw(read_tensor_block(path))


def write_block_atomic(path, data: np.ndarray) -> None:
    """Write a tensor block via temp + rename so readers never see a partial file."""
    tmp = f"{path}.tmp"
    write_tensor_block(tmp, data)
    os.replace(tmp, path)


def half_resolution_normals(normals: torch.Tensor, mask: torch.Tensor):
    """2x2 average + renormalize: the supervision target at half resolution."""
    n = torch.nn.functional.avg_pool2d(normals[None] * mask[None], 2)[0]
    m = torch.nn.functional.avg_pool2d(mask[None], 2)[0]
    n = torch.where(m > 0, n / m.clamp(min=1e-12), torch.zeros_like(n))
    lengths = n.norm(dim=0, keepdim=True)
    n = torch.where(lengths > 1e-6, n / lengths.clamp(min=1e-12), torch.zeros_like(n))
    return n, (m > 0.5).float()
