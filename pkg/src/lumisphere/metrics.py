"""Reflectance-map and normal-map quality metrics, plus results tables.

Map error is the plain L2 difference over jointly defined cells and the
structural dissimilarity DSSIM = (1 - SSIM) / 2 of the luminance
channel. Normal error is the per-pixel angle between unit vectors in
degrees. A results table mirrors the usual per-method, per-split layout
and round-trips through a JSON record.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .core import NormalMap, ReflectanceMap, disc_mask
from .domain import densify
from .render import luminance

log = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

OVERLAP_WARN = 0.25


@dataclass(frozen=True)
class RmScore:
    mse: float
    dssim: float
    defined_overlap: float  # jointly defined cells / in-disc cells
    filled: bool = False  # undefined cells were densified before SSIM windowing


@dataclass(frozen=True)
class NormalScore:
    mean: float
    median: float
    rmse: float  # all in degrees

    def __post_init__(self):
        for v in (self.mean, self.median, self.rmse):
            if not 0.0 <= v <= 180.0:
                raise ValueError(f"angular statistic {v} outside [0, 180] degrees")


def rm_mse(a: ReflectanceMap, b: ReflectanceMap) -> float:
    """Mean over jointly defined cells of the mean squared RGB difference."""
    if a.resolution != b.resolution:
        raise ValueError("resolution mismatch")
    joint = a.defined & b.defined
    if not np.any(joint):
        raise ValueError("maps share no defined cells")
    diff = a.radiance[joint] - b.radiance[joint]
    return float(np.mean(diff * diff))


def _gaussian_window():
    r = SSIM_WINDOW // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
    k /= k.sum()
    return np.outer(k, k)


def ssim(img1: np.ndarray, img2: np.ndarray, data_range: float) -> float:
    """Mean SSIM of two 2-D images, Gaussian-windowed, border cropped.

    Statistics use the weighted (biased) covariance; the mean runs over
    the region whose windows never leave the image, so tiny inputs
    (below the 11-pixel window) are rejected.
    """
    img1 = np.asarray(img1, dtype=np.float64)
    img2 = np.asarray(img2, dtype=np.float64)
    if img1.shape != img2.shape or img1.ndim != 2:
        raise ValueError("ssim expects two equal-shape 2-D images")
    if min(img1.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels on a side")
    if data_range <= 0:
        if np.array_equal(img1, img2):
            return 1.0
        raise ValueError("data_range must be positive for non-identical images")

    w = _gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    mu1 = convolve2d(img1, w, mode="valid")
    mu2 = convolve2d(img2, w, mode="valid")
    s11 = convolve2d(img1 * img1, w, mode="valid") - mu1 * mu1
    s22 = convolve2d(img2 * img2, w, mode="valid") - mu2 * mu2
    s12 = convolve2d(img1 * img2, w, mode="valid") - mu1 * mu2

    num = (2.0 * mu1 * mu2 + c1) * (2.0 * s12 + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
    return float(np.mean(num / den))


def rm_dssim(a: ReflectanceMap, b: ReflectanceMap) -> float:
    """(1 - SSIM) / 2 on luminance; sparse maps are RBF-densified first."""
    if a.resolution != b.resolution:
        raise ValueError("resolution mismatch")
    joint = a.defined & b.defined
    if not np.any(joint):
        raise ValueError("maps share no defined cells")
    disc = disc_mask(a.resolution)

    def prepare(rm: ReflectanceMap) -> np.ndarray:
        if not np.array_equal(rm.defined, disc):
            rm = densify(rm, method="rbf")
            log.info("rm_dssim: densified a sparse map before windowing")
        return luminance(rm.radiance) * disc

    la = prepare(a)
    lb = prepare(b)
    joint_vals = np.concatenate([la[disc], lb[disc]])
    data_range = float(joint_vals.max() - joint_vals.min())
    s = ssim(la, lb, data_range) if data_range > 0 else (1.0 if np.array_equal(la, lb) else 0.0)
    return (1.0 - s) / 2.0


def rm_score(a: ReflectanceMap, b: ReflectanceMap) -> RmScore:
    """MSE + DSSIM + overlap accounting for one map pair."""
    disc = disc_mask(a.resolution)
    joint = a.defined & b.defined
    overlap = float(joint.sum() / disc.sum())
    if overlap < OVERLAP_WARN:
        log.warning("rm_score: only %.0f%% of the disc is jointly defined", 100 * overlap)
    filled = not (np.array_equal(a.defined, disc) and np.array_equal(b.defined, disc))
    return RmScore(rm_mse(a, b), rm_dssim(a, b), overlap, filled)


def normal_error_stats(pred: NormalMap, gt: NormalMap) -> NormalScore:
    """Mean / median / RMSE of per-pixel angular error in degrees."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise ValueError("normal maps differ in size")
    joint = pred.mask & gt.mask
    if not np.any(joint):
        raise ValueError("no jointly masked-in pixels")
    dots = np.clip(np.sum(pred.normals[joint] * gt.normals[joint], axis=-1), -1.0, 1.0)
    deg = np.degrees(np.arccos(dots))
    return NormalScore(float(deg.mean()), float(np.median(deg)), float(np.sqrt(np.mean(deg * deg))))


# ---------------------------------------------------------------------------
# Results tables

RESULTS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["splits", "methods"],
    "properties": {
        "splits": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "methods": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "scores"],
                "properties": {
                    "name": {"type": "string"},
                    "scores": {
                        "type": "object",
                        "additionalProperties": {
                            "type": "object",
                            "required": ["mse", "dssim"],
                            "properties": {
                                "mse": {"type": "number", "minimum": 0},
                                "dssim": {"type": "number"},
                            },
                        },
                    },
                },
            },
        },
    },
}


def results_record(scores: dict, splits: list[str]) -> dict:
    """Normalize {method: {split: (mse, dssim)}} into the JSON record shape.

    Method and split order is preserved as given.
    """
    if not scores:
        raise ValueError("need at least one evaluated method")
    return {
        "splits": list(splits),
        "methods": [
            {
                "name": name,
                "scores": {
                    split: {"mse": float(per_split[split][0]), "dssim": float(per_split[split][1])}
                    for split in splits
                    if split in per_split
                },
            }
            for name, per_split in scores.items()
        ],
    }


def format_results_table(record: dict) -> str:
    """Aligned plain-text table: one row per method, MSE/DSSIM per split."""
    splits = record["splits"]
    header = ["Method"]
    for split in splits:
        header += [f"{split} MSE", f"{split} DSSIM"]
    rows = [header]
    for entry in record["methods"]:
        row = [entry["name"]]
        for split in splits:
            cell = entry["scores"].get(split)
            if cell is None:
                row += ["---", "---"]
            else:
                row += [f"{cell['mse']:.4f}", f"{cell['dssim']:.4f}"]
        rows.append(row)

    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    out = io.StringIO()
    for i, row in enumerate(rows):
        out.write("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() + "\n")
        if i == 0:
            out.write("  ".join("-" * w for w in widths) + "\n")
    return out.getvalue()


def emit_results_table(scores: dict, splits: list[str]):
    """Return (text table, machine-readable record) for the given scores."""
    record = results_record(scores, splits)
    return format_results_table(record), record


def record_roundtrip(record: dict) -> dict:
    return json.loads(json.dumps(record))
