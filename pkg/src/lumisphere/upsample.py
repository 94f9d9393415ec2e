"""Guided upsampling of low-resolution orientation maps.

Orientation estimates arrive at a fraction of the photo resolution; the
full-resolution RGB image guides their upsampling so orientation edges
land on image edges instead of being blurred across them. Weights are
the product of a spatial Gaussian (in guide pixels) and a range Gaussian
on guide-color distance; weighted unit vectors are averaged and
renormalized.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .core import NormalMap, RadianceImage

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UpsampleParams:
    sigma_spatial: float  # guide pixels
    sigma_range: float  # guide-color distance on [0, 1] data
    window_radius: int  # guide pixels, box support for low-res taps

    def __post_init__(self):
        if self.sigma_spatial <= 0 or self.sigma_range <= 0 or self.window_radius < 1:
            raise ValueError("upsample parameters must be positive (window_radius >= 1)")
        if self.window_radius < math.ceil(2 * self.sigma_spatial):
            log.warning(
                "window_radius %d below 2*sigma_spatial=%.1f; kernel will be truncated",
                self.window_radius,
                2 * self.sigma_spatial,
            )

    @classmethod
    def for_scale(cls, factor: float) -> "UpsampleParams":
        return cls(
            sigma_spatial=float(factor),
            sigma_range=0.1,
            window_radius=max(1, int(round(2 * factor))),
        )


def _low_centers_in_guide(n_low: int, n_hi: int) -> np.ndarray:
    scale = n_hi / n_low
    return (np.arange(n_low) + 0.5) * scale - 0.5


def joint_upsample(nm_low: NormalMap, guide: RadianceImage, params: UpsampleParams) -> NormalMap:
    """Upsample a normal map to the guide's resolution with joint bilateral weights.

    Output normals are unit length with z clamped to >= 0 before the final
    renormalization. High-res pixels whose whole window carries zero
    weight fall back to the nearest masked-in low-res normal (counted in
    the log).
    """
    hh, hw = guide.height, guide.width
    lh, lw = nm_low.height, nm_low.width
    if hh < lh or hw < lw:
        raise ValueError(f"guide {hh}x{hw} smaller than normal map {lh}x{lw}")

    cy = _low_centers_in_guide(lh, hh)
    cx = _low_centers_in_guide(lw, hw)

    # mask consistency under nearest-neighbor downscale
    nn_r = np.clip(np.round(cy).astype(int), 0, hh - 1)
    nn_c = np.clip(np.round(cx).astype(int), 0, hw - 1)
    if not np.array_equal(guide.mask[np.ix_(nn_r, nn_c)], nm_low.mask):
        raise ValueError("guide mask and low-res mask disagree under nearest-neighbor downscale")

    scale = min(hh / lh, hw / lw)
    rl = max(1, math.ceil(params.window_radius / scale))

    ys = np.arange(hh, dtype=np.float64)[:, None]
    xs = np.arange(hw, dtype=np.float64)[None, :]
    py = (ys + 0.5) * (lh / hh) - 0.5  # position in low-res pixel units
    px = (xs + 0.5) * (lw / hw) - 0.5
    base_r = np.floor(py).astype(int)
    base_c = np.floor(px).astype(int)

    guide_low = guide.rgb[np.ix_(nn_r, nn_c)]  # guide color at each low tap

    acc = np.zeros((hh, hw, 3))
    wsum = np.zeros((hh, hw))
    inv2ss = 1.0 / (2.0 * params.sigma_spatial**2)
    inv2sr = 1.0 / (2.0 * params.sigma_range**2)

    for dr in range(-rl, rl + 1):
        for dc in range(-rl, rl + 1):
            r = base_r + dr
            c = base_c + dc
            inside = (r >= 0) & (r < lh) & (c >= 0) & (c < lw)
            rc = np.clip(r, 0, lh - 1)
            cc = np.clip(c, 0, lw - 1)
            usable = inside & nm_low.mask[rc, cc]
            d2 = (ys - cy[rc]) ** 2 + (xs - cx[cc]) ** 2
            g2 = np.sum((guide.rgb - guide_low[rc, cc]) ** 2, axis=-1)
            w = np.where(usable, np.exp(-d2 * inv2ss - g2 * inv2sr), 0.0)
            acc += w[..., None] * nm_low.normals[rc, cc]
            wsum += w

    fallback = guide.mask & (wsum <= 0.0)
    if np.any(fallback):
        log.warning("joint_upsample: %d pixels fell back to nearest low-res normal", int(fallback.sum()))
        # nearest masked-in low cell, by distance in low-res pixel units
        _, (ir, ic) = distance_transform_edt(~nm_low.mask, return_indices=True)
        rr = np.clip(np.round(np.broadcast_to(py, (hh, hw))).astype(int), 0, lh - 1)
        cc = np.clip(np.round(np.broadcast_to(px, (hh, hw))).astype(int), 0, lw - 1)
        acc[fallback] = nm_low.normals[ir[rr[fallback], cc[fallback]], ic[rr[fallback], cc[fallback]]]
        wsum[fallback] = 1.0

    normals = np.zeros((hh, hw, 3))
    safe = guide.mask
    normals[safe] = acc[safe] / wsum[safe, None]
    normals[..., 2] = np.clip(normals[..., 2], 0.0, None)
    lengths = np.linalg.norm(normals[safe], axis=-1)
    lengths = np.where(lengths > 0, lengths, 1.0)
    normals[safe] /= lengths[:, None]
    # fully degenerate after the z-clamp: point at the viewer
    dead = safe & (np.linalg.norm(normals, axis=-1) < 0.5)
    normals[dead] = (0.0, 0.0, 1.0)
    return NormalMap(normals, guide.mask)


def bilinear_upsample(nm_low: NormalMap, height: int, width: int) -> NormalMap:
    """Mask-aware bilinear upsampling baseline (no guide)."""
    lh, lw = nm_low.height, nm_low.width
    py = (np.arange(height, dtype=np.float64)[:, None] + 0.5) * (lh / height) - 0.5
    px = (np.arange(width, dtype=np.float64)[None, :] + 0.5) * (lw / width) - 0.5
    r0 = np.floor(py).astype(int)
    c0 = np.floor(px).astype(int)
    fr = py - r0
    fc = px - c0

    acc = np.zeros((height, width, 3))
    wsum = np.zeros((height, width))
    for dr, wr in ((0, 1 - fr), (1, fr)):
        for dc, wc in ((0, 1 - fc), (1, fc)):
            r = np.clip(r0 + dr, 0, lh - 1)
            c = np.clip(c0 + dc, 0, lw - 1)
            w = (wr * wc) * nm_low.mask[r, c]
            acc += w[..., None] * nm_low.normals[r, c]
            wsum += w

    mask = wsum > 0
    normals = np.zeros((height, width, 3))
    normals[mask] = acc[mask] / wsum[mask, None]
    normals[..., 2] = np.clip(normals[..., 2], 0.0, None)
    lengths = np.linalg.norm(normals[mask], axis=-1)
    lengths = np.where(lengths > 0, lengths, 1.0)
    normals[mask] /= lengths[:, None]
    dead = mask & (np.linalg.norm(normals, axis=-1) < 0.5)
    normals[dead] = (0.0, 0.0, 1.0)
    return NormalMap(normals, mask)
