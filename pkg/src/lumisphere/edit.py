"""Image-based editing on top of reflectance maps.

An edit session fixes an object's photo, its normal map and its
reflectance map, and caches the LAB difference between the photo and its
own re-rendering. Material swaps and shape changes re-render with the
new map or normals and add the cached difference back, so texture and
shadow detail survive any number of edits without drift.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .color import lab_to_rgb, rgb_to_lab
from .core import NormalMap, RadianceImage, ReflectanceMap, _freeze, shade_from_normals

log = logging.getLogger(__name__)

UNDEFINED_WARN_FRACTION = 0.05


@dataclass(frozen=True)
class EditSession:
    """Immutable editing context; all edits are pure functions of it."""

    image: RadianceImage
    normals: NormalMap
    rm: ReflectanceMap
    residual: np.ndarray = field(init=False)  # LAB(image) - LAB(own re-rendering)

    def __post_init__(self):
        if (self.image.height, self.image.width) != (self.normals.height, self.normals.width):
            raise ValueError("image and normal map differ in size")
        if not np.array_equal(self.image.mask, self.normals.mask):
            raise ValueError("image and normal map masks differ")
        resynth = shade_from_normals(self.normals, self.rm)
        residual = rgb_to_lab(self.image.rgb) - rgb_to_lab(resynth.rgb)
        object.__setattr__(self, "residual", _freeze(residual))


def _resynthesize(session: EditSession, shaded: RadianceImage) -> RadianceImage:
    if shaded.undefined is not None:
        n_und = int(shaded.undefined.sum())
        fg = int(session.image.mask.sum())
        if fg and n_und > UNDEFINED_WARN_FRACTION * fg:
            log.warning(
                "edit: %d of %d foreground pixels had undefined lookups", n_und, fg
            )
    lab = rgb_to_lab(shaded.rgb) + session.residual
    rgb = np.where(session.image.mask[..., None], lab_to_rgb(lab), session.image.rgb)
    # unclamped floats stay internal; export clamps
    return RadianceImage(rgb, session.image.mask, shaded.undefined)


def material_transfer(session: EditSession, rm_new: ReflectanceMap) -> RadianceImage:
    """Re-render the object under another object's reflectance map."""
    return _resynthesize(session, shade_from_normals(session.normals, rm_new))


def shape_reshade(session: EditSession, nm_new: NormalMap) -> RadianceImage:
    """Re-render the object as if its surface had the given normals."""
    if (nm_new.height, nm_new.width) != (session.image.height, session.image.width):
        raise ValueError("new normal map differs in size")
    if not np.array_equal(nm_new.mask, session.image.mask):
        raise ValueError("new normal map mask differs from the session mask")
    return _resynthesize(session, shade_from_normals(nm_new, session.rm))


# ---------------------------------------------------------------------------
# Normal painting


@dataclass(frozen=True)
class Stroke:
    """One brush application: tilt normals toward a direction, Gaussian falloff."""

    center: tuple  # (row, col) pixel coordinates
    radius: float  # pixels, hard support bound
    tilt: tuple  # (dx, dy) image-plane direction the surface tips toward
    angle: float  # max rotation in degrees, applied at the center
    strength: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("stroke radius must be > 0")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("stroke strength must lie in [0, 1]")
        if math.hypot(*self.tilt) == 0 and self.angle != 0:
            raise ValueError("tilt direction must be nonzero")


def _rodrigues(vectors: np.ndarray, axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    c = np.cos(angles)[..., None]
    s = np.sin(angles)[..., None]
    k = axis.reshape(1, 3)
    cross = np.cross(np.broadcast_to(k, vectors.shape), vectors)
    dot = (vectors @ axis)[..., None]
    return vectors * c + cross * s + k * dot * (1.0 - c)


def normal_paint(nm: NormalMap, stroke: Stroke) -> NormalMap:
    """Rotate normals inside the stroke toward the tilt direction.

    The rotation axis is the in-plane perpendicular of the tilt
    direction, the per-pixel angle is strength * angle * Gaussian(d)
    with sigma = radius / 2; support is clipped at the radius, z is
    clamped to >= 0 and the result renormalized.
    """
    cy, cx = stroke.center
    if not (0 <= cy < nm.height and 0 <= cx < nm.width):
        raise ValueError("stroke center lies outside the image")
    if stroke.strength == 0.0 or stroke.angle == 0.0:
        return nm

    tx, ty = stroke.tilt
    tlen = math.hypot(tx, ty)
    axis = np.array([-ty / tlen, tx / tlen, 0.0])

    ys = np.arange(nm.height, dtype=np.float64)[:, None]
    xs = np.arange(nm.width, dtype=np.float64)[None, :]
    d2 = (ys - cy) ** 2 + (xs - cx) ** 2
    sigma = stroke.radius / 2.0
    falloff = np.exp(-d2 / (2.0 * sigma * sigma))
    inside = (d2 <= stroke.radius**2) & nm.mask
    angles = np.where(inside, math.radians(stroke.angle) * stroke.strength * falloff, 0.0)

    rotated = _rodrigues(nm.normals.reshape(-1, 3), axis, angles.ravel()).reshape(nm.normals.shape)
    rotated[..., 2] = np.clip(rotated[..., 2], 0.0, None)
    lengths = np.linalg.norm(rotated, axis=-1, keepdims=True)
    rotated = np.where(lengths > 1e-12, rotated / np.where(lengths > 0, lengths, 1.0), [0.0, 0.0, 1.0])
    out = np.where(inside[..., None], rotated, nm.normals)
    return NormalMap(out, nm.mask)
