"""From image space to the directional domain, and sparse-to-dense maps.

A shaded image plus a normal map yields unstructured (orientation,
radiance) samples. Scatter-max pools them into a sparse reflectance map
robustly against shadowed duplicates; Gaussian-RBF interpolation or a
least-squares spherical-harmonics fit (or an external learned predictor,
by file) turn sparse into dense.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import lpmv

from .core import (
    NormalMap,
    RadianceImage,
    ReflectanceMap,
    _freeze,
    disc_mask,
    grid_orientations,
)

log = logging.getLogger(__name__)

DEFAULT_EPS_DEG = 5.0
DEFAULT_RBF_SIGMA = 8.0
DEFAULT_SH_ORDER = 2

_CHUNK = 65536  # samples per block when forming cell x sample dot products


@dataclass(frozen=True)
class OrientedSamples:
    """Unstructured appearance observations: unit directions with z >= 0 and RGB."""

    directions: np.ndarray  # (N, 3)
    radiance: np.ndarray  # (N, 3) linear, finite

    def __post_init__(self):
        directions = np.asarray(self.directions, dtype=np.float64).reshape(-1, 3)
        radiance = np.asarray(self.radiance, dtype=np.float64).reshape(-1, 3)
        if directions.shape[0] != radiance.shape[0]:
            raise ValueError("directions and radiance disagree on sample count")
        if directions.shape[0]:
            norms = np.linalg.norm(directions, axis=-1)
            if not np.allclose(norms, 1.0, atol=1e-5):
                raise ValueError("sample directions must be unit length")
            if np.any(directions[:, 2] < -1e-6):
                raise ValueError("sample directions must lie on the upper hemisphere")
            if not np.all(np.isfinite(radiance)):
                raise ValueError("sample radiance must be finite")
        object.__setattr__(self, "directions", _freeze(directions))
        object.__setattr__(self, "radiance", _freeze(radiance))

    def __len__(self) -> int:
        return self.directions.shape[0]


@dataclass(frozen=True)
class SparseReflectanceMap(ReflectanceMap):
    """Reflectance map with per-cell sample counts (>= 1 wherever defined)."""

    counts: np.ndarray = None  # (R, R) int

    def __post_init__(self):
        super().__post_init__()
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != self.defined.shape:
            raise ValueError("counts shape mismatch")
        if np.any(counts[self.defined] < 1) or np.any(counts[~self.defined] != 0):
            raise ValueError("counts must be >= 1 exactly on defined cells")
        object.__setattr__(self, "counts", _freeze(counts))


@dataclass(frozen=True)
class ShCoefficients:
    """Real spherical-harmonics expansion, (order + 1)^2 RGB coefficients."""

    order: int
    coeffs: np.ndarray  # ((order+1)^2, 3)

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("order must be >= 0")
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        want = (self.order + 1) ** 2
        if coeffs.shape != (want, 3):
            raise ValueError(f"expected {want} RGB coefficients, got {coeffs.shape}")
        object.__setattr__(self, "coeffs", _freeze(coeffs))


def collect_samples(img: RadianceImage, nm: NormalMap) -> OrientedSamples:
    """One (orientation, radiance) sample per jointly masked-in pixel.

    Pixels flagged undefined in the image (failed lookups) carry a
    sentinel, not radiance, and are skipped.
    """
    if (img.height, img.width) != (nm.height, nm.width):
        raise ValueError(
            f"image {img.height}x{img.width} and normal map {nm.height}x{nm.width} differ in size"
        )
    joint = img.mask & nm.mask
    if img.undefined is not None:
        joint &= ~img.undefined
    return OrientedSamples(nm.normals[joint], img.rgb[joint])


def _cell_dirs(resolution: int):
    mask = disc_mask(resolution)
    return grid_orientations(resolution)[mask], mask


def scatter_max(
    samples: OrientedSamples,
    resolution: int,
    eps_deg: float = DEFAULT_EPS_DEG,
    key: str = "channel",
) -> SparseReflectanceMap:
    """Pool samples into cells by a max over all samples closer than eps_deg.

    A cell keeps the per-channel max over samples whose direction has
    dot product strictly above cos(eps_deg) with the cell orientation;
    maxing instead of averaging lets an unshadowed observation of an
    orientation win over shadowed ones. `key="luminance"` switches to
    whole-pixel max keyed on luminance, for comparison.
    """
    if key not in ("channel", "luminance"):
        raise ValueError(f"unknown max key {key!r}")
    cell_dirs, mask = _cell_dirs(resolution)
    m = cell_dirs.shape[0]
    thresh = math.cos(math.radians(eps_deg))

    best = np.full((m, 3), -np.inf)
    best_lum = np.full(m, -np.inf)
    counts = np.zeros(m, dtype=np.int64)
    lum_w = np.array([0.212671, 0.715160, 0.072169])

    for lo in range(0, len(samples), _CHUNK):
        dirs = samples.directions[lo : lo + _CHUNK]
        vals = samples.radiance[lo : lo + _CHUNK]
        near = (cell_dirs @ dirs.T) > thresh  # (m, chunk)
        counts += near.sum(axis=1)
        if key == "channel":
            for c in range(3):
                contrib = np.where(near, vals[None, :, c], -np.inf)
                np.maximum(best[:, c], contrib.max(axis=1, initial=-np.inf), out=best[:, c])
        else:
            lums = vals @ lum_w
            contrib = np.where(near, lums[None, :], -np.inf)
            idx = np.argmax(contrib, axis=1)
            hit = contrib[np.arange(m), idx] > best_lum
            best_lum[hit] = contrib[hit, idx[hit]]
            best[hit] = vals[idx[hit]]

    defined_flat = counts > 0
    radiance = np.zeros((resolution, resolution, 3))
    defined = np.zeros((resolution, resolution), dtype=bool)
    counts_grid = np.zeros((resolution, resolution), dtype=np.int64)
    flat_vals = np.where(defined_flat[:, None], best, 0.0)
    radiance[mask] = flat_vals
    defined[mask] = defined_flat
    counts_grid[mask] = counts
    return SparseReflectanceMap(radiance, defined, counts_grid)


def rbf_reconstruct(
    samples: OrientedSamples,
    sigma: float = DEFAULT_RBF_SIGMA,
    resolution: int = 32,
) -> ReflectanceMap:
    """Dense map by normalized Gaussian-RBF scattered-data interpolation.

    Each in-disc cell receives sum_i w_i L_i / sum_i w_i with
    w = exp(-(sigma * arccos(<cell, sample>))^2). Cells whose weight sum
    degenerates below 1e-12 fall back to the angularly nearest sample
    (counted in the log).
    """
    if len(samples) < 1:
        raise ValueError("rbf reconstruction needs at least one sample")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    cell_dirs, mask = _cell_dirs(resolution)
    m = cell_dirs.shape[0]

    num = np.zeros((m, 3))
    den = np.zeros(m)
    best_dot = np.full(m, -np.inf)
    nearest = np.zeros((m, 3))

    for lo in range(0, len(samples), _CHUNK):
        dirs = samples.directions[lo : lo + _CHUNK]
        vals = samples.radiance[lo : lo + _CHUNK]
        dots = np.clip(cell_dirs @ dirs.T, -1.0, 1.0)
        w = np.exp(-((sigma * np.arccos(dots)) ** 2))
        num += w @ vals
        den += w.sum(axis=1)
        idx = np.argmax(dots, axis=1)
        top = dots[np.arange(m), idx]
        hit = top > best_dot
        best_dot[hit] = top[hit]
        nearest[hit] = vals[idx[hit]]

    degenerate = den < 1e-12
    if np.any(degenerate):
        log.warning(
            "rbf_reconstruct: %d cells with degenerate weight sum fell back to nearest sample",
            int(degenerate.sum()),
        )
    out = np.where(degenerate[:, None], nearest, num / np.where(degenerate, 1.0, den)[:, None])

    radiance = np.zeros((resolution, resolution, 3))
    radiance[mask] = out
    defined = np.zeros((resolution, resolution), dtype=bool)
    defined[mask] = True
    return ReflectanceMap(radiance, defined)


def samples_from_map(sparse: ReflectanceMap) -> OrientedSamples:
    """Defined cells as samples at their lifted cell-center orientations."""
    dirs = grid_orientations(sparse.resolution)[sparse.defined]
    return OrientedSamples(dirs, sparse.radiance[sparse.defined])


def densify(
    sparse: ReflectanceMap,
    method: str = "rbf",
    sigma: float = DEFAULT_RBF_SIGMA,
    prediction_path=None,
) -> ReflectanceMap:
    """Fill every in-disc cell of a sparse map.

    method="rbf" interpolates the defined cells (taken as samples at
    their cell centers). method="external" loads a dense prediction a
    learned densifier wrote as a tensor-block file and validates its
    shape and definedness; a missing or mismatched file is an error,
    never a fallback.
    """
    if not np.any(sparse.defined):
        raise ValueError("densify needs at least one defined cell")
    if method == "rbf":
        return rbf_reconstruct(samples_from_map(sparse), sigma=sigma, resolution=sparse.resolution)
    if method == "external":
        if prediction_path is None:
            raise ValueError("external densify requires prediction_path")
        from .tensorblock import read_tensor_block

        data = read_tensor_block(prediction_path)
        res = sparse.resolution
        if data.shape != (res, res, 3):
            raise ValueError(
                f"external prediction {prediction_path} has shape {data.shape}, expected {(res, res, 3)}"
            )
        mask = disc_mask(res)
        if not np.all(np.isfinite(data[mask])):
            raise ValueError(f"external prediction {prediction_path} has non-finite cells")
        radiance = np.where(mask[..., None], np.clip(data, 0.0, None), 0.0)
        return ReflectanceMap(radiance, mask)
    raise ValueError(f"unknown densify method {method!r}")


# ---------------------------------------------------------------------------
# Spherical harmonics


def sh_basis(order: int, dirs: np.ndarray) -> np.ndarray:
    """Real SH basis values at unit directions, (N, (order+1)^2), index l(l+1)+m."""
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    z = np.clip(dirs[:, 2], -1.0, 1.0)
    phi = np.arctan2(dirs[:, 1], dirs[:, 0])
    out = np.empty((dirs.shape[0], (order + 1) ** 2))
    for l in range(order + 1):
        for m_ in range(-l, l + 1):
            am = abs(m_)
            # lpmv carries the Condon-Shortley phase
            knorm = math.sqrt(
                (2 * l + 1) / (4 * math.pi) * math.factorial(l - am) / math.factorial(l + am)
            )
            leg = lpmv(am, l, z)
            if m_ == 0:
                y = knorm * leg
            elif m_ > 0:
                y = math.sqrt(2.0) * knorm * np.cos(am * phi) * leg
            else:
                y = math.sqrt(2.0) * knorm * np.sin(am * phi) * leg
            out[:, l * (l + 1) + m_] = y
    return out


def sh_project(rm: ReflectanceMap, order: int = DEFAULT_SH_ORDER) -> ShCoefficients:
    """Least-squares fit of the SH basis to the defined cells, per channel."""
    nbasis = (order + 1) ** 2
    ndefined = int(rm.defined.sum())
    if ndefined < nbasis:
        raise ValueError(
            f"need at least {nbasis} defined cells for SH order {order}, have {ndefined}"
        )
    dirs = grid_orientations(rm.resolution)[rm.defined]
    basis = sh_basis(order, dirs)
    coeffs, _, rank, _ = np.linalg.lstsq(basis, rm.radiance[rm.defined], rcond=None)
    if rank < nbasis:
        raise ValueError(f"SH normal equations rank-deficient: rank {rank} < basis size {nbasis}")
    return ShCoefficients(order, coeffs)


def sh_reconstruct(c: ShCoefficients, resolution: int = 32) -> ReflectanceMap:
    """Evaluate the expansion at every in-disc cell; negative lobes clamp to 0."""
    mask = disc_mask(resolution)
    dirs = grid_orientations(resolution)[mask]
    values = sh_basis(c.order, dirs) @ c.coeffs
    radiance = np.zeros((resolution, resolution, 3))
    radiance[mask] = np.clip(values, 0.0, None)
    return ReflectanceMap(radiance, mask)
