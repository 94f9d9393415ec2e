"""Forward model: ground-truth reflectance maps, shapes, exposure.

A reflectance-map cell integrates BRDF x environment x cosine over the
hemisphere of incoming light for its orientation, with the viewer fixed
on +z (distant light, orthographic view, no shadows). Shapes are
analytic surfaces ray-traced orthographically to exact unit normals.
Shadows exist only as explicit darkening masks used to exercise the
max-pooled change of domain.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .brdf import eval_brdf
from .core import NormalMap, RadianceImage, ReflectanceMap, disc_mask, grid_orientations
from .domain import OrientedSamples, _cell_dirs
from .envmap import EnvironmentMap

log = logging.getLogger(__name__)

LUMA = np.array([0.212671, 0.715160, 0.072169])


# ---------------------------------------------------------------------------
# Reflectance map synthesis


def _onb(n):
    """Right-handed orthonormal basis (x, y) completing unit n with n.z >= 0."""
    a = -1.0 / (1.0 + n[2])
    b = n[0] * n[1] * a
    x = np.array([1.0 + n[0] * n[0] * a, b, -n[0]])
    y = np.array([b, 1.0 + n[1] * n[1] * a, -n[1]])
    return x, y


def brdf_convolve(
    env: EnvironmentMap,
    brdf,
    resolution: int = 32,
    n_samples: int = 1024,
    seed: int = 0,
) -> ReflectanceMap:
    """Ground-truth reflectance map by stratified Monte Carlo integration.

    Every in-disc cell integrates f(w_i -> viewer) * L_env(w_i) * cos
    over its upper hemisphere with a stratified sample grid; n_samples
    rounds down to a square. Each cell draws from its own seeded stream,
    so results do not depend on evaluation order and are reproducible
    bit-for-bit per (seed, resolution).
    """
    if n_samples < 64:
        raise ValueError("n_samples must be >= 64")
    side = math.isqrt(n_samples)
    cell_dirs, mask = _cell_dirs(resolution)
    viewer = np.array([0.0, 0.0, 1.0])

    ii, jj = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    strata = np.stack([ii.ravel(), jj.ravel()], axis=-1)  # (side^2, 2)

    rows, cols = np.nonzero(mask)
    radiance = np.zeros((resolution, resolution, 3))
    for k in range(cell_dirs.shape[0]):
        n = cell_dirs[k]
        assert n[2] > 0.0, "in-disc cell with viewer below local horizon"
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rows[k], cols[k])))
        u = (strata + rng.random((side * side, 2))) / side
        z = u[:, 0]
        phi = 2.0 * math.pi * u[:, 1]
        r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        local_in = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)

        bx, by = _onb(n)
        world_in = local_in[:, 0, None] * bx + local_in[:, 1, None] * by + local_in[:, 2, None] * n
        local_out = np.array([bx[2], by[2], n[2]])

        f = eval_brdf(brdf, local_in, np.broadcast_to(local_out, local_in.shape))
        e = env.sample(world_in)
        radiance[rows[k], cols[k]] = (2.0 * math.pi / (side * side)) * np.sum(
            f * e * z[:, None], axis=0
        )

    return ReflectanceMap(radiance, mask)


# ---------------------------------------------------------------------------
# Procedural shapes


@dataclass(frozen=True)
class Sphere:
    pass


@dataclass(frozen=True)
class Torus:
    minor: float
    major: float

    def __post_init__(self):
        if not (0.0 < self.minor < self.major) or self.major + self.minor > 1.0:
            raise ValueError("torus needs 0 < minor < major and major + minor <= 1")


@dataclass(frozen=True)
class Superellipsoid:
    e1: float
    e2: float

    def __post_init__(self):
        if not (0.0 < self.e1 <= 2.0 and 0.0 < self.e2 <= 2.0):
            raise ValueError("superellipsoid exponents must lie in (0, 2]")


def _rot_y(deg: float) -> np.ndarray:
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _pixel_grid(size: int):
    coords = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    y = np.broadcast_to(coords[:, None], (size, size))
    x = np.broadcast_to(coords[None, :], (size, size))
    return x, y


def _torus_normals(shape: Torus, rot: np.ndarray, size: int):
    x, y = _pixel_grid(size)
    n_pix = size * size
    inv = rot.T
    origins = np.stack([x.ravel(), y.ravel(), np.full(n_pix, 2.0)], axis=-1) @ inv.T
    d = inv @ np.array([0.0, 0.0, -1.0])

    rr = shape.major * shape.major
    i_ = np.einsum("ij,ij->i", origins, origins) + rr - shape.minor**2
    h = 2.0 * origins @ d
    dxy2 = d[0] * d[0] + d[1] * d[1]
    oxy_dxy = origins[:, 0] * d[0] + origins[:, 1] * d[1]
    oxy2 = origins[:, 0] ** 2 + origins[:, 1] ** 2

    c3 = 2.0 * h
    c2 = h * h + 2.0 * i_ - 4.0 * rr * dxy2
    c1 = 2.0 * h * i_ - 8.0 * rr * oxy_dxy
    c0 = i_ * i_ - 4.0 * rr * oxy2

    comp = np.zeros((n_pix, 4, 4))
    comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
    comp[:, 0, 3] = -c0
    comp[:, 1, 3] = -c1
    comp[:, 2, 3] = -c2
    comp[:, 3, 3] = -c3
    roots = np.linalg.eigvals(comp)

    real = np.abs(roots.imag) < 1e-7
    positive = roots.real > 1e-9
    t = np.where(real & positive, roots.real, np.inf).min(axis=1)
    hit = np.isfinite(t)

    p = origins + np.where(hit, t, 0.0)[:, None] * d
    k = np.einsum("ij,ij->i", p, p) + rr - shape.minor**2
    grad = 4.0 * k[:, None] * p - 8.0 * rr * np.concatenate([p[:, :2], np.zeros((n_pix, 1))], axis=1)
    grad = np.where(hit[:, None], grad, 0.0)
    return grad @ rot.T, hit


def _superellipsoid_normals(shape: Superellipsoid, rot: np.ndarray, size: int):
    x, y = _pixel_grid(size)
    n_pix = size * size
    inv = rot.T
    origins = np.stack([x.ravel(), y.ravel(), np.full(n_pix, 2.0)], axis=-1) @ inv.T
    d = inv @ np.array([0.0, 0.0, -1.0])

    p2e2 = 2.0 / shape.e2
    p2e1 = 2.0 / shape.e1
    e2e1 = shape.e2 / shape.e1

    def implicit(p):
        ax = np.abs(p[..., 0])
        ay = np.abs(p[..., 1])
        az = np.abs(p[..., 2])
        return (ax**p2e2 + ay**p2e2) ** e2e1 + az**p2e1 - 1.0

    n_steps = 256
    ts = np.linspace(0.0, 4.0, n_steps)
    inside_prev = np.zeros(n_pix, dtype=bool)
    t_lo = np.full(n_pix, np.nan)
    t_hi = np.full(n_pix, np.nan)
    for i, t in enumerate(ts):
        f = implicit(origins + t * d)
        inside = f < 0.0
        fresh = inside & ~inside_prev & np.isnan(t_lo)
        if i > 0:
            t_lo[fresh] = ts[i - 1]
            t_hi[fresh] = t
        inside_prev = inside
    hit = ~np.isnan(t_lo)

    lo = np.where(hit, t_lo, 0.0)
    hi = np.where(hit, t_hi, 1.0)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        f = implicit(origins + mid[:, None] * d)
        lo = np.where(f > 0.0, mid, lo)
        hi = np.where(f > 0.0, hi, mid)
    t = 0.5 * (lo + hi)

    p = origins + t[:, None] * d
    eps = 1e-12
    ax = np.maximum(np.abs(p[:, 0]), eps)
    ay = np.maximum(np.abs(p[:, 1]), eps)
    az = np.maximum(np.abs(p[:, 2]), eps)
    a = ax**p2e2 + ay**p2e2
    gx = p2e1 * a ** (e2e1 - 1.0) * ax ** (p2e2 - 1.0) * np.sign(p[:, 0])
    gy = p2e1 * a ** (e2e1 - 1.0) * ay ** (p2e2 - 1.0) * np.sign(p[:, 1])
    gz = p2e1 * az ** (p2e1 - 1.0) * np.sign(p[:, 2])
    grad = np.stack([gx, gy, gz], axis=-1)
    grad = np.where(hit[:, None], grad, 0.0)
    return grad @ rot.T, hit


def procedural_normals(shape, rotation_y: float = 0.0, size: int = 128) -> NormalMap:
    """Exact orthographic normal map of an analytic shape rotated about y.

    First-hit normals always face the viewer; pixels that end up
    back-facing through numerical grazing are masked out and counted.
    """
    if size < 2:
        raise ValueError("size must be >= 2")
    rot = _rot_y(rotation_y)

    if isinstance(shape, Sphere):
        x, y = _pixel_grid(size)
        hit = (x * x + y * y <= 1.0).ravel()
        zz = np.clip(1.0 - x * x - y * y, 0.0, None)
        grad = np.stack([x.ravel(), y.ravel(), np.sqrt(zz).ravel()], axis=-1)
        grad[~hit] = 0.0
    elif isinstance(shape, Torus):
        grad, hit = _torus_normals(shape, rot, size)
    elif isinstance(shape, Superellipsoid):
        grad, hit = _superellipsoid_normals(shape, rot, size)
    else:
        raise TypeError(f"unsupported shape {type(shape).__name__}")

    lengths = np.linalg.norm(grad, axis=-1)
    ok = hit & (lengths > 0)
    normals = np.zeros((size * size, 3))
    normals[ok] = grad[ok] / lengths[ok, None]

    back = ok & (normals[:, 2] < 0.0)
    if np.any(back):
        log.info("procedural_normals: masked %d back-facing grazing pixels", int(back.sum()))
        ok &= ~back
    normals[:, 2] = np.clip(normals[:, 2], 0.0, None)
    normals[~ok] = 0.0

    lengths = np.linalg.norm(normals, axis=-1)
    ok &= lengths > 0.5
    normals[ok] /= lengths[ok, None]
    return NormalMap(normals.reshape(size, size, 3), ok.reshape(size, size))


# ---------------------------------------------------------------------------
# Exposure


def luminance(rgb: np.ndarray) -> np.ndarray:
    return np.asarray(rgb, dtype=np.float64) @ LUMA


def log_average_luminance(img: RadianceImage, delta: float = 1e-4) -> float:
    lum = luminance(img.rgb[img.mask])
    if lum.size == 0:
        return 0.0
    return float(np.exp(np.mean(np.log(delta + lum))))


_BELOW_ONE = float(np.nextafter(np.float32(1.0), np.float32(0.0)))  # survives f32 storage


def reinhard_curve(rgb: np.ndarray, key: float, log_avg: float) -> np.ndarray:
    """Global photographic operator for a fixed scene log-average luminance."""
    rgb = np.asarray(rgb, dtype=np.float64)
    lum = luminance(rgb)
    scaled = key * lum / log_avg
    display = scaled / (1.0 + scaled)
    factor = np.where(lum > 0.0, display / np.where(lum > 0.0, lum, 1.0), 0.0)
    out = rgb * factor[..., None]
    return np.clip(out, 0.0, _BELOW_ONE)


def reinhard_tonemap(img: RadianceImage, key: float) -> RadianceImage:
    """Map linear radiance to display range [0, 1) with the scene-keyed curve.

    An all-black foreground has no log-average to normalize by and passes
    through unchanged.
    """
    if key <= 0:
        raise ValueError("key must be > 0")
    log_avg = log_average_luminance(img)
    if log_avg <= 0.0:
        return img
    out = np.where(img.mask[..., None], reinhard_curve(img.rgb, key, log_avg), img.rgb)
    return RadianceImage(out, img.mask, img.undefined)


def tonemap_map(rm: ReflectanceMap, key: float, log_avg: float) -> ReflectanceMap:
    """Apply the image's tone curve to a reflectance map's defined cells."""
    out = np.where(rm.defined[..., None], reinhard_curve(rm.radiance, key, log_avg), 0.0)
    return ReflectanceMap(out, rm.defined)


# ---------------------------------------------------------------------------
# Shadow augmentation


def blob_shadow_factors(
    height: int, width: int, rng: np.random.Generator, n_blobs: int = 3, darken: float = 0.4
) -> np.ndarray:
    """(H, W) multiplicative factors in {darken, 1}: random soft-disc blobs."""
    factors = np.ones((height, width))
    ys = (np.arange(height) + 0.5) / height
    xs = (np.arange(width) + 0.5) / width
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    for _ in range(n_blobs):
        cy, cx = rng.random(2)
        radius = 0.1 + 0.2 * rng.random()
        inside = (yy - cy) ** 2 + (xx - cx) ** 2 < radius * radius
        factors[inside] = darken
    return factors


def shadowed_samples_with_coverage(
    samples: OrientedSamples,
    resolution: int,
    eps_deg: float,
    rng: np.random.Generator,
    shadow_fraction: float = 0.4,
    darken: float = 0.4,
):
    """Darken a random sample subset while protecting each cone's winners.

    Samples that achieve a per-channel max inside any qualifying cone are
    protected so the pooled map is unchanged by construction; the rest
    are eligible for darkening. Returns (shadowed samples, factors).
    """
    cell_dirs, _ = _cell_dirs(resolution)
    thresh = math.cos(math.radians(eps_deg))
    protected = np.zeros(len(samples), dtype=bool)
    near = (cell_dirs @ samples.directions.T) > thresh
    vals = samples.radiance
    for k in range(cell_dirs.shape[0]):
        idx = np.nonzero(near[k])[0]
        if idx.size == 0:
            continue
        for c in range(3):
            protected[idx[np.argmax(vals[idx, c])]] = True

    eligible = np.nonzero(~protected)[0]
    n_shadow = min(int(shadow_fraction * len(samples)), eligible.size)
    chosen = rng.choice(eligible, size=n_shadow, replace=False) if n_shadow else np.array([], int)
    factors = np.ones(len(samples))
    factors[chosen] = darken
    return OrientedSamples(samples.directions, vals * factors[:, None]), factors
