"""Isotropic BRDFs: tabulated half-angle grids and analytic models.

The tabulated format is the familiar measured-material binary: a
12-byte header of three little-endian int32 dimensions (90, 90, 180),
then 90*90*180 double-precision values per channel, red block first.
Values are stored pre-scaled; evaluation applies the per-channel scales
(1.0, 1.15, 1.66) / 1500. The half-angle axis is quadratically warped so
specular peaks get dense sampling.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

THETA_H_RES = 90
THETA_D_RES = 90
PHI_D_RES = 180
TABLE_CELLS = THETA_H_RES * THETA_D_RES * PHI_D_RES
CHANNEL_SCALES = np.array([1.0 / 1500.0, 1.15 / 1500.0, 1.66 / 1500.0])


class MerlFormatError(ValueError):
    """Raised for malformed tabulated-BRDF files."""


@dataclass(frozen=True)
class BrdfTable:
    """Tabulated isotropic BRDF over (theta_half, theta_diff, phi_diff)."""

    grid: np.ndarray  # (3, 90, 90, 180) float64, unscaled file values

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.shape != (3, THETA_H_RES, THETA_D_RES, PHI_D_RES):
            raise ValueError(f"grid must be (3, 90, 90, 180), got {grid.shape}")
        grid = np.ascontiguousarray(grid)
        grid.flags.writeable = False
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class Lambert:
    albedo: np.ndarray  # RGB in [0, 1]

    def __post_init__(self):
        albedo = np.asarray(self.albedo, dtype=np.float64).reshape(3)
        if np.any(albedo < 0) or np.any(albedo > 1):
            raise ValueError("albedo must lie in [0, 1]")
        albedo.flags.writeable = False
        object.__setattr__(self, "albedo", albedo)


@dataclass(frozen=True)
class BlinnPhong:
    diffuse: np.ndarray  # RGB in [0, 1]
    specular: np.ndarray  # RGB in [0, 1]
    exponent: float

    def __post_init__(self):
        diffuse = np.asarray(self.diffuse, dtype=np.float64).reshape(3)
        specular = np.asarray(self.specular, dtype=np.float64).reshape(3)
        if np.any(diffuse < 0) or np.any(diffuse > 1) or np.any(specular < 0) or np.any(specular > 1):
            raise ValueError("diffuse and specular must lie in [0, 1]")
        if self.exponent <= 0:
            raise ValueError("exponent must be > 0")
        diffuse.flags.writeable = False
        specular.flags.writeable = False
        object.__setattr__(self, "diffuse", diffuse)
        object.__setattr__(self, "specular", specular)


def parse_merl(payload: bytes) -> BrdfTable:
    """Decode a tabulated-BRDF binary into a BrdfTable.

    NaN entries are tolerated but counted and logged; negative entries
    clamp to zero at evaluation time.
    """
    if len(payload) < 12:
        raise MerlFormatError(f"header truncated: {len(payload)} bytes, need 12")
    dims = struct.unpack("<iii", payload[:12])
    if dims != (THETA_H_RES, THETA_D_RES, PHI_D_RES):
        raise MerlFormatError(
            f"unexpected dimensions {dims}, expected {(THETA_H_RES, THETA_D_RES, PHI_D_RES)}"
        )
    want = 12 + TABLE_CELLS * 3 * 8
    if len(payload) != want:
        raise MerlFormatError(f"payload size mismatch: expected {want} bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype="<f8", offset=12)
    nan_count = int(np.isnan(data).sum())
    if nan_count:
        log.warning("tabulated BRDF contains %d NaN entries", nan_count)
    grid = data.reshape(3, THETA_H_RES, THETA_D_RES, PHI_D_RES)
    return BrdfTable(grid)


def load_merl(path) -> BrdfTable:
    with open(path, "rb") as f:
        return parse_merl(f.read())


def write_merl(path, table: BrdfTable) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack("<iii", THETA_H_RES, THETA_D_RES, PHI_D_RES))
        f.write(table.grid.astype("<f8").tobytes())


# ---------------------------------------------------------------------------
# Evaluation


def _normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _half_diff_angles(w_in: np.ndarray, w_out: np.ndarray):
    """Map direction pairs in the local (+z up) frame to half/diff angles."""
    half = _normalize(w_in + w_out)
    theta_h = np.arccos(np.clip(half[..., 2], -1.0, 1.0))
    phi_h = np.arctan2(half[..., 1], half[..., 0])

    # rotate w_in by -phi_h about z, then -theta_h about y, giving the diff vector
    cp, sp = np.cos(-phi_h), np.sin(-phi_h)
    x1 = cp * w_in[..., 0] - sp * w_in[..., 1]
    y1 = sp * w_in[..., 0] + cp * w_in[..., 1]
    z1 = w_in[..., 2]
    ct, st = np.cos(-theta_h), np.sin(-theta_h)
    x2 = ct * x1 + st * z1
    z2 = -st * x1 + ct * z1
    theta_d = np.arccos(np.clip(z2, -1.0, 1.0))
    phi_d = np.arctan2(y1, x2)
    phi_d = np.mod(phi_d, np.pi)  # reciprocity folds phi_d into [0, pi)
    return theta_h, theta_d, phi_d


def _table_indices(theta_h, theta_d, phi_d):
    """Continuous grid indices; the half-angle axis uses the square-root warp."""
    ih = np.sqrt(np.clip(theta_h / (math.pi / 2.0), 0.0, None)) * THETA_H_RES
    idx_d = theta_d / (math.pi / 2.0) * THETA_D_RES
    idx_p = phi_d / math.pi * PHI_D_RES
    return ih, idx_d, idx_p


def _trilinear(grid: np.ndarray, ih, id_, ip):
    """Clamped trilinear interpolation of the (3, H, D, P) grid at index coords."""

    def split(idx, res):
        i0 = np.clip(np.floor(idx - 0.5), 0, res - 1).astype(np.int64)
        i1 = np.minimum(i0 + 1, res - 1)
        f = np.clip(idx - 0.5 - i0, 0.0, 1.0)
        return i0, i1, f

    h0, h1, fh = split(ih, THETA_H_RES)
    d0, d1, fd = split(id_, THETA_D_RES)
    p0, p1, fp = split(ip, PHI_D_RES)

    out = 0.0
    for hi, wh in ((h0, 1 - fh), (h1, fh)):
        for di, wd in ((d0, 1 - fd), (d1, fd)):
            for pi, wp in ((p0, 1 - fp), (p1, fp)):
                w = (wh * wd * wp)[..., None]
                out = out + w * np.moveaxis(grid[:, hi, di, pi], 0, -1)
    return out


def eval_brdf(brdf, w_in: np.ndarray, w_out: np.ndarray) -> np.ndarray:
    """Evaluate a BRDF for local-frame direction pairs, (..., 3) -> (..., 3) RGB.

    Directions below the local horizon contribute zero (flagged in the
    log once per call).
    """
    w_in = np.asarray(w_in, dtype=np.float64)
    w_out = np.asarray(w_out, dtype=np.float64)
    below = (w_in[..., 2] < 0) | (w_out[..., 2] < 0)
    if np.any(below):
        log.debug("eval_brdf: %d below-horizon pairs evaluate to zero", int(np.sum(below)))

    if isinstance(brdf, Lambert):
        out = np.broadcast_to(brdf.albedo / math.pi, w_in.shape[:-1] + (3,)).copy()
    elif isinstance(brdf, BlinnPhong):
        half = _normalize(w_in + w_out)
        ndoth = np.clip(half[..., 2], 0.0, 1.0)
        # (n + 8) / (8 pi): keeps the cosine-weighted half-angle lobe under
        # the specular color at every incidence
        lobe = (brdf.exponent + 8.0) / (8.0 * math.pi) * ndoth**brdf.exponent
        out = brdf.diffuse / math.pi + lobe[..., None] * brdf.specular
    elif isinstance(brdf, BrdfTable):
        theta_h, theta_d, phi_d = _half_diff_angles(w_in, w_out)
        ih, id_, ip = _table_indices(theta_h, theta_d, phi_d)
        out = np.clip(_trilinear(brdf.grid, ih, id_, ip), 0.0, None) * CHANNEL_SCALES
    else:
        raise TypeError(f"unsupported BRDF type {type(brdf).__name__}")

    out = np.where(below[..., None], 0.0, out)
    return out


def directional_hemispherical(brdf, w_out, n_samples: int = 4096, seed: int = 0) -> np.ndarray:
    """Monte Carlo albedo check: integral of f * cos over incoming hemisphere."""
    rng = np.random.default_rng(seed)
    u = rng.random((n_samples, 2))
    z = u[:, 0]
    phi = 2 * math.pi * u[:, 1]
    r = np.sqrt(np.clip(1 - z * z, 0, None))
    w_in = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    w_out = np.broadcast_to(np.asarray(w_out, dtype=np.float64), (n_samples, 3))
    f = eval_brdf(brdf, w_in, w_out)
    return (2 * math.pi / n_samples) * np.sum(f * z[:, None], axis=0)


def check_energy(brdf, incidence_degrees=(0.0, 30.0, 60.0), tol: float = 0.05) -> None:
    """Raise if directional-hemispherical reflectance exceeds 1 at sampled incidences."""
    for deg in incidence_degrees:
        th = math.radians(deg)
        refl = directional_hemispherical(brdf, (math.sin(th), 0.0, math.cos(th)))
        if np.any(refl > 1.0 + tol):
            raise ValueError(
                f"BRDF reflects more than it receives at {deg} degrees: {refl}"
            )
