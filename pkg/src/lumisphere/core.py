"""Orientation-indexed appearance: the reflectance map and its lookups.

A reflectance map stores, for every visible surface orientation, the RGB
radiance leaving that surface toward a distant viewer on the +z axis.
Orientations are encoded by the unit normal's (x, y) components, written
(s, t); the visible half-sphere (z >= 0) maps onto the unit disc.

Raster convention (fixed here, documented once):
    * an R x R grid covers [-1, 1]^2; cell (row, col) has its center at
      s = (col + 0.5) / R * 2 - 1,  t = (row + 0.5) / R * 2 - 1
    * a cell belongs to the disc iff its center does (s^2 + t^2 <= 1)
    * row index follows t with no vertical flip; image exporters flip
      so +t renders upward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_RESOLUTION = 32

UNIT_TOL = 1e-6


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# Orientation <-> (s, t) <-> grid cells


def orientation_to_st(n):
    """Project unit normal(s) with z >= 0 onto the (s, t) disc.

    Accepts a single 3-vector or an (..., 3) array. Back-facing input
    (z < 0) is rejected: it has no home in the half-sphere map.
    """
    n = np.asarray(n, dtype=np.float64)
    norms = np.linalg.norm(n, axis=-1)
    if not np.allclose(norms, 1.0, atol=1e-5):
        raise ValueError("orientation must be unit length")
    if np.any(n[..., 2] < -UNIT_TOL):
        raise ValueError("back-facing orientation (z < 0) cannot be mapped")
    return n[..., 0], n[..., 1]


def st_to_orientation(s, t):
    """Lift disc coordinates back to the upper hemisphere: (s, t, sqrt(1-s^2-t^2))."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    zz = 1.0 - s * s - t * t
    if np.any(zz < -1e-9):
        raise ValueError("s^2 + t^2 > 1: point lies outside the unit disc")
    z = np.sqrt(np.clip(zz, 0.0, None))
    return np.stack([s, t, z], axis=-1)


def st_to_pixel(s, t, resolution: int = DEFAULT_RESOLUTION):
    """Map disc coordinates to the (row, col) grid cell containing them."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(s * s + t * t > 1.0 + 1e-9):
        raise ValueError("s^2 + t^2 > 1: point lies outside the unit disc")
    col = np.clip(np.floor((s + 1.0) * 0.5 * resolution), 0, resolution - 1).astype(np.int64)
    row = np.clip(np.floor((t + 1.0) * 0.5 * resolution), 0, resolution - 1).astype(np.int64)
    return row, col


def pixel_to_st(row, col, resolution: int = DEFAULT_RESOLUTION):
    """Return the (s, t) center of grid cell (row, col)."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    row = np.asarray(row, dtype=np.float64)
    col = np.asarray(col, dtype=np.float64)
    s = (col + 0.5) / resolution * 2.0 - 1.0
    t = (row + 0.5) / resolution * 2.0 - 1.0
    return s, t


def grid_st(resolution: int):
    """(s, t) centers of every cell as two (R, R) arrays indexed [row, col]."""
    idx = np.arange(resolution, dtype=np.float64)
    coords = (idx + 0.5) / resolution * 2.0 - 1.0
    t = np.broadcast_to(coords[:, None], (resolution, resolution))
    s = np.broadcast_to(coords[None, :], (resolution, resolution))
    return s, t


def disc_mask(resolution: int) -> np.ndarray:
    """Boolean (R, R) mask of cells whose center lies inside the unit disc."""
    s, t = grid_st(resolution)
    return s * s + t * t <= 1.0


def grid_orientations(resolution: int) -> np.ndarray:
    """(R, R, 3) lifted cell-center orientations (garbage outside the disc)."""
    s, t = grid_st(resolution)
    zz = np.clip(1.0 - s * s - t * t, 0.0, None)
    return np.stack([s, t, np.sqrt(zz)], axis=-1)


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class ReflectanceMap:
    """R x R grid of linear RGB radiance over the (s, t) disc with validity mask."""

    radiance: np.ndarray  # (R, R, 3) float, linear, >= 0 where defined
    defined: np.ndarray  # (R, R) bool

    def __post_init__(self):
        radiance = np.asarray(self.radiance, dtype=np.float64)
        defined = np.asarray(self.defined, dtype=bool)
        if radiance.ndim != 3 or radiance.shape[2] != 3 or radiance.shape[0] != radiance.shape[1]:
            raise ValueError(f"radiance must be (R, R, 3), got {radiance.shape}")
        if defined.shape != radiance.shape[:2]:
            raise ValueError("defined mask shape mismatch")
        defined = defined & disc_mask(radiance.shape[0])
        vals = radiance[defined]
        if vals.size and (not np.all(np.isfinite(vals)) or np.any(vals < 0)):
            raise ValueError("defined cells must hold finite non-negative radiance")
        object.__setattr__(self, "radiance", _freeze(radiance))
        object.__setattr__(self, "defined", _freeze(defined))

    @property
    def resolution(self) -> int:
        return self.radiance.shape[0]

    @classmethod
    def full(cls, values: np.ndarray) -> "ReflectanceMap":
        """Map defined on the whole disc (mask clipped to the disc automatically)."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.ones(values.shape[:2], dtype=bool))


@dataclass(frozen=True)
class NormalMap:
    """Per-pixel unit normals (z >= 0 on the foreground) with a foreground mask."""

    normals: np.ndarray  # (H, W, 3) float
    mask: np.ndarray  # (H, W) bool

    def __post_init__(self):
        normals = np.asarray(self.normals, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if normals.ndim != 3 or normals.shape[2] != 3:
            raise ValueError(f"normals must be (H, W, 3), got {normals.shape}")
        if mask.shape != normals.shape[:2]:
            raise ValueError("mask shape mismatch")
        fg = normals[mask]
        if fg.size:
            norms = np.linalg.norm(fg, axis=-1)
            if not np.allclose(norms, 1.0, atol=1e-5):
                raise ValueError("foreground normals must be unit length")
            if np.any(fg[:, 2] < -UNIT_TOL):
                raise ValueError("foreground normals must face the viewer (z >= 0)")
        object.__setattr__(self, "normals", _freeze(normals))
        object.__setattr__(self, "mask", _freeze(mask))

    @property
    def height(self) -> int:
        return self.normals.shape[0]

    @property
    def width(self) -> int:
        return self.normals.shape[1]


@dataclass(frozen=True)
class RadianceImage:
    """Linear RGB image with foreground mask; `undefined` flags failed lookups."""

    rgb: np.ndarray  # (H, W, 3) float, linear, >= 0 at masked-in pixels
    mask: np.ndarray  # (H, W) bool
    undefined: np.ndarray | None = field(default=None)

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError(f"rgb must be (H, W, 3), got {rgb.shape}")
        if mask.shape != rgb.shape[:2]:
            raise ValueError("mask shape mismatch")
        fg = rgb[mask]
        if fg.size and not np.all(np.isfinite(fg)):
            raise ValueError("masked-in pixels must be finite")
        object.__setattr__(self, "rgb", _freeze(rgb))
        object.__setattr__(self, "mask", _freeze(mask))
        if self.undefined is not None:
            und = np.asarray(self.undefined, dtype=bool)
            if und.shape != mask.shape:
                raise ValueError("undefined mask shape mismatch")
            object.__setattr__(self, "undefined", _freeze(und))

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]


# ---------------------------------------------------------------------------
# Appearance lookup


def lookup_batch(rm: ReflectanceMap, normals: np.ndarray):
    """Bilinear lookup for an (..., 3) array of upper-hemisphere unit normals.

    Weights of undefined (or out-of-grid) neighbor cells are redistributed
    to the defined ones. Returns (values, valid): where valid is False all
    four neighbors were undefined and the value is the 0 sentinel -- an
    unknown appearance, not black radiance.
    """
    n = np.asarray(normals, dtype=np.float64)
    flat = n.reshape(-1, 3)
    res = rm.resolution
    s, t = flat[:, 0], flat[:, 1]

    # continuous cell coordinates; cell centers sit at integers
    u = (s + 1.0) * 0.5 * res - 0.5
    v = (t + 1.0) * 0.5 * res - 0.5
    c0 = np.floor(u).astype(np.int64)
    r0 = np.floor(v).astype(np.int64)
    fu = u - c0
    fv = v - r0

    w = np.stack(
        [(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv], axis=-1
    )  # (N, 4)
    rows = np.stack([r0, r0, r0 + 1, r0 + 1], axis=-1)
    cols = np.stack([c0, c0 + 1, c0, c0 + 1], axis=-1)

    in_grid = (rows >= 0) & (rows < res) & (cols >= 0) & (cols < res)
    rows_c = np.clip(rows, 0, res - 1)
    cols_c = np.clip(cols, 0, res - 1)
    ok = in_grid & rm.defined[rows_c, cols_c]
    w = np.where(ok, w, 0.0)

    wsum = w.sum(axis=-1)
    valid = wsum > 0.0
    vals = rm.radiance[rows_c, cols_c]  # (N, 4, 3)
    out = np.einsum("nk,nkc->nc", w, vals)
    out[valid] /= wsum[valid, None]
    out[~valid] = 0.0

    return out.reshape(n.shape[:-1] + (3,)), valid.reshape(n.shape[:-1])


def lookup(rm: ReflectanceMap, n) -> np.ndarray | None:
    """Appearance of one orientation; None when the whole neighborhood is undefined."""
    n = np.asarray(n, dtype=np.float64)
    orientation_to_st(n)  # validates unit length and hemisphere
    value, valid = lookup_batch(rm, n[None, :])
    return value[0] if bool(valid[0]) else None


def render_sphere(rm: ReflectanceMap, size: int) -> RadianceImage:
    """Draw the map on an orthographic sphere (the lit-sphere picture).

    Pixel (row, col) inside the disc shows lookup at the lifted center
    orientation; the image mask is the disc. Failed lookups render as the
    0 sentinel and are flagged in `undefined`.
    """
    if size < 2:
        raise ValueError("size must be >= 2")
    mask = disc_mask(size)
    dirs = grid_orientations(size)
    rgb = np.zeros((size, size, 3))
    undefined = np.zeros((size, size), dtype=bool)
    values, valid = lookup_batch(rm, dirs[mask])
    rgb[mask] = values
    undefined[mask] = ~valid
    return RadianceImage(rgb, mask, undefined)


def shade_from_normals(nm: NormalMap, rm: ReflectanceMap) -> RadianceImage:
    """Re-render an object from its normal map by per-pixel appearance lookup."""
    rgb = np.zeros((nm.height, nm.width, 3))
    undefined = np.zeros((nm.height, nm.width), dtype=bool)
    values, valid = lookup_batch(rm, nm.normals[nm.mask])
    rgb[nm.mask] = values
    undefined[nm.mask] = ~valid
    return RadianceImage(rgb, nm.mask, undefined)
