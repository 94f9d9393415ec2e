"""Reflectance-map toolkit: estimation, reconstruction, evaluation, editing."""

__version__ = "0.1.0"

from .core import (
    NormalMap,
    RadianceImage,
    ReflectanceMap,
    lookup,
    lookup_batch,
    orientation_to_st,
    pixel_to_st,
    render_sphere,
    shade_from_normals,
    st_to_orientation,
    st_to_pixel,
)
from .domain import (
    OrientedSamples,
    ShCoefficients,
    SparseReflectanceMap,
    collect_samples,
    densify,
    rbf_reconstruct,
    scatter_max,
    sh_project,
    sh_reconstruct,
)
from .edit import EditSession, Stroke, material_transfer, normal_paint, shape_reshade
from .upsample import UpsampleParams, bilinear_upsample, joint_upsample

__all__ = [
    "NormalMap",
    "RadianceImage",
    "ReflectanceMap",
    "OrientedSamples",
    "SparseReflectanceMap",
    "ShCoefficients",
    "EditSession",
    "Stroke",
    "UpsampleParams",
    "collect_samples",
    "densify",
    "joint_upsample",
    "bilinear_upsample",
    "lookup",
    "lookup_batch",
    "material_transfer",
    "normal_paint",
    "orientation_to_st",
    "pixel_to_st",
    "rbf_reconstruct",
    "render_sphere",
    "scatter_max",
    "shade_from_normals",
    "shape_reshade",
    "sh_project",
    "sh_reconstruct",
    "st_to_orientation",
    "st_to_pixel",
]
