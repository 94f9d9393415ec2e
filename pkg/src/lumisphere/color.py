"""Color conversions for the editing pipeline.

Edits preserve texture and shadow detail as a per-pixel delta in CIE
L*a*b* (D65 white point); conversions here run between *linear* RGB with
sRGB primaries and LAB. The sRGB transfer curve appears only at the
8-bit export boundary.
"""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_D65 = np.array([0.95047, 1.0, 1.08883])

_EPS = (6.0 / 29.0) ** 3
_KAPPA_SLOPE = 1.0 / (3.0 * (6.0 / 29.0) ** 2)
_OFFSET = 4.0 / 29.0


def _lab_f(t):
    return np.where(t > _EPS, np.cbrt(np.where(t > 0, t, 1.0)), _KAPPA_SLOPE * t + _OFFSET)


def _lab_f_inv(f):
    delta = 6.0 / 29.0
    return np.where(f > delta, f**3, (f - _OFFSET) / _KAPPA_SLOPE)


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Linear RGB (sRGB primaries, D65) -> L*a*b*, vectorized over (..., 3)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    xyz = rgb @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _D65)
    lab = np.empty_like(rgb)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """L*a*b* -> linear RGB. Out-of-gamut results pass through unclamped."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _D65
    return xyz @ _XYZ_TO_RGB.T


def srgb_encode(rgb: np.ndarray) -> np.ndarray:
    """Linear [0, 1] -> sRGB-encoded [0, 1] (gamma for 8-bit export)."""
    rgb = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    return np.where(rgb <= 0.0031308, 12.92 * rgb, 1.055 * rgb ** (1.0 / 2.4) - 0.055)


def srgb_decode(srgb: np.ndarray) -> np.ndarray:
    srgb = np.asarray(srgb, dtype=np.float64)
    return np.where(srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4)


def clamp_gamut(rgb: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] for export, counting clipped pixels in the log."""
    rgb = np.asarray(rgb, dtype=np.float64)
    out_of_gamut = int(np.sum(np.any((rgb < 0) | (rgb > 1), axis=-1)))
    if out_of_gamut:
        log.info("clamped %d out-of-gamut pixels at export", out_of_gamut)
    return np.clip(rgb, 0.0, 1.0)
