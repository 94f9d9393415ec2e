"""Color conversions and reflectance-map based editing."""

import math

import numpy as np
import pytest

from lumisphere.color import lab_to_rgb, rgb_to_lab, srgb_decode, srgb_encode
from lumisphere.core import (
    NormalMap,
    ReflectanceMap,
    lookup,
    shade_from_normals,
)
from lumisphere.dataset import SynthConfig, generate_dataset, item_image, item_normals, item_rm
from lumisphere.edit import EditSession, Stroke, material_transfer, normal_paint, shape_reshade
from lumisphere.render import Sphere, luminance, procedural_normals


class TestLab:
    def test_black(self):
        lab = rgb_to_lab(np.zeros(3))
        assert np.abs(lab).max() < 1e-12
        assert np.abs(lab_to_rgb(lab)).max() < 1e-12

    def test_white_point(self):
        lab = rgb_to_lab(np.ones(3))
        assert lab[0] == pytest.approx(100.0, abs=0.01)
        assert abs(lab[1]) < 0.01 and abs(lab[2]) < 0.01

    def test_round_trip_1000_random(self):
        rng = np.random.default_rng(0)
        rgb = rng.random((1000, 3))
        back = lab_to_rgb(rgb_to_lab(rgb))
        assert np.abs(back - rgb).max() < 1e-4

    def test_srgb_curve_round_trip(self):
        rng = np.random.default_rng(1)
        x = rng.random((100, 3))
        assert np.abs(srgb_decode(srgb_encode(x)) - x).max() < 1e-12


def synthetic_session(seed=0, size=48, tonemapped=True):
    """Self-consistent scene: the image is the object's own re-rendering.

    With tonemapped=False the residual is exactly zero (the tone curve and
    bilinear interpolation do not commute, so display sessions keep a tiny
    one).
    """
    from lumisphere.dataset import builtin_registry, procedural_env
    from lumisphere.render import brdf_convolve, tonemap_map, log_average_luminance, reinhard_tonemap

    reg = builtin_registry(n_envs=2)
    shapes = list(reg.shapes.values())
    mats = list(reg.materials.values())
    rng = np.random.default_rng(seed)
    nm = procedural_normals(shapes[seed % len(shapes)], float(rng.uniform(0, 360)), size)
    rm_linear = brdf_convolve(
        procedural_env(300 + seed), mats[seed % len(mats)], 32, 256, seed=seed
    )
    img = shade_from_normals(nm, rm_linear)
    if not tonemapped:
        return EditSession(img, nm, rm_linear), rm_linear
    log_avg = log_average_luminance(img)
    display = reinhard_tonemap(img, 0.5)
    rm_display = tonemap_map(rm_linear, 0.5, log_avg)
    return EditSession(display, nm, rm_display), rm_display


class TestMaterialTransfer:
    def test_identity_transfer_reproduces_input(self):
        session, rm = synthetic_session(1)
        out = material_transfer(session, rm)
        assert np.abs(out.rgb - session.image.rgb)[session.image.mask].max() < 1e-6

    def test_transfer_back_restores(self):
        session_a, rm_a = synthetic_session(2)
        _, rm_b = synthetic_session(3)
        once = material_transfer(session_a, rm_b)
        session_mid = EditSession(once, session_a.normals, rm_b)
        back = material_transfer(session_mid, rm_a)
        fg = session_a.image.mask
        assert np.abs(back.rgb - session_a.image.rgb)[fg].max() < 1e-3

    def test_brighter_map_brightens(self):
        session, rm = synthetic_session(4)
        doubled = ReflectanceMap(np.clip(rm.radiance * 2.0, 0.0, None), rm.defined)
        out = material_transfer(session, doubled)
        fg = session.image.mask
        frac = np.mean(luminance(out.rgb[fg]) >= luminance(session.image.rgb[fg]) - 1e-9)
        assert frac >= 0.99

    def test_background_untouched(self):
        session, _ = synthetic_session(5)
        _, rm_b = synthetic_session(6)
        out = material_transfer(session, rm_b)
        bg = ~session.image.mask
        assert np.array_equal(out.rgb[bg], session.image.rgb[bg])

    def test_residual_fixed_across_edits(self):
        session, rm = synthetic_session(7)
        before = session.residual.copy()
        material_transfer(session, rm)
        shape_reshade(session, session.normals)
        assert np.array_equal(session.residual, before)


class TestShapeReshade:
    def test_identity(self):
        session, _ = synthetic_session(8)
        out = shape_reshade(session, session.normals)
        assert np.abs(out.rgb - session.image.rgb)[session.image.mask].max() < 1e-6

    def test_flattening_converges_to_pole_value(self):
        session, rm = synthetic_session(9, tonemapped=False)
        pole = lookup(rm, np.array([0.0, 0.0, 1.0]))
        fg = session.image.mask
        spreads = []
        for alpha in (0.0, 0.7, 1.0):
            flat = (1 - alpha) * session.normals.normals + alpha * np.array([0.0, 0.0, 1.0])
            flat /= np.maximum(np.linalg.norm(flat, axis=-1, keepdims=True), 1e-12)
            flat = np.where(fg[..., None], flat, 0.0)
            out = shape_reshade(session, NormalMap(flat, fg))
            spreads.append(np.abs(out.rgb[fg] - pole).mean())
        assert spreads[2] < spreads[1] < spreads[0]
        assert spreads[2] < 1e-6  # residual is zero for the self-consistent scene

    def test_mask_mismatch_rejected(self):
        session, _ = synthetic_session(10)
        other = procedural_normals(Sphere(), 0.0, session.image.height)
        if np.array_equal(other.mask, session.image.mask):
            pytest.skip("masks happen to agree")
        with pytest.raises(ValueError, match="mask"):
            shape_reshade(session, other)


class TestHighlightDisplacement:
    def test_painted_bump_moves_highlight(self):
        # single-highlight map on a sphere: tilting every normal toward +s by
        # angle theta relocates the bright lookup to s = -sin(theta)
        size = 64
        radiance = np.zeros((32, 32, 3))
        defined = np.ones((32, 32), dtype=bool)
        radiance[16, 16] = 10.0
        radiance += 0.05
        rm = ReflectanceMap.full(radiance)
        nm = procedural_normals(Sphere(), 0.0, size)
        base = shade_from_normals(nm, rm)
        session = EditSession(base, nm, rm)

        theta = 12.0
        stroke = Stroke(
            center=(size // 2, size // 2),
            radius=float(size),
            tilt=(1.0, 0.0),
            angle=theta,
            strength=1.0,
        )
        painted = normal_paint(nm, stroke)
        out = shape_reshade(session, painted)

        def centroid(img):
            w = luminance(img.rgb) * img.mask
            w = np.where(w > np.percentile(w[img.mask], 99), w, 0.0)
            ys, xs = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
            return np.array([np.sum(w * ys) / w.sum(), np.sum(w * xs) / w.sum()])

        shift = centroid(out) - centroid(base)
        # falloff at the new highlight (within ~8 px of center) is near 1,
        # so the displacement follows the closed form -sin(theta) * size/2
        expected_cols = -math.sin(math.radians(theta)) * size / 2.0
        assert shift[1] == pytest.approx(expected_cols, abs=1.5)
        assert abs(shift[0]) < 1.5


class TestNormalPaint:
    def test_zero_strength_identity(self):
        nm = procedural_normals(Sphere(), 0.0, 32)
        out = normal_paint(nm, Stroke((16, 16), 8.0, (1.0, 0.0), 30.0, strength=0.0))
        assert np.array_equal(out.normals, nm.normals)

    def test_disjoint_strokes_commute(self):
        nm = procedural_normals(Sphere(), 0.0, 64)
        s1 = Stroke((20, 20), 6.0, (1.0, 0.0), 25.0)
        s2 = Stroke((44, 44), 6.0, (0.0, 1.0), 25.0)
        ab = normal_paint(normal_paint(nm, s1), s2)
        ba = normal_paint(normal_paint(nm, s2), s1)
        assert np.array_equal(ab.normals, ba.normals)

    def test_center_pixel_exact_rotation(self):
        nm = procedural_normals(Sphere(), 0.0, 64)
        angle = 20.0
        stroke = Stroke((32, 20), 10.0, (0.0, 1.0), angle, strength=1.0)
        out = normal_paint(nm, stroke)
        # closed form at the falloff center: Rodrigues rotation about the
        # in-plane perpendicular of the tilt direction
        axis = np.array([-1.0, 0.0, 0.0])
        v = nm.normals[32, 20]
        th = math.radians(angle)
        want = (
            v * math.cos(th)
            + np.cross(axis, v) * math.sin(th)
            + axis * np.dot(axis, v) * (1 - math.cos(th))
        )
        want[2] = max(want[2], 0.0)
        want /= np.linalg.norm(want)
        assert np.abs(out.normals[32, 20] - want).max() < 1e-12

    def test_outside_support_untouched(self):
        nm = procedural_normals(Sphere(), 0.0, 64)
        out = normal_paint(nm, Stroke((32, 32), 5.0, (1.0, 0.0), 30.0))
        ys, xs = np.meshgrid(np.arange(64), np.arange(64), indexing="ij")
        outside = ((ys - 32) ** 2 + (xs - 32) ** 2 > 25.0) & nm.mask
        assert np.array_equal(out.normals[outside], nm.normals[outside])

    def test_stroke_validation(self):
        nm = procedural_normals(Sphere(), 0.0, 32)
        with pytest.raises(ValueError):
            normal_paint(nm, Stroke((200, 200), 5.0, (1.0, 0.0), 10.0))
        with pytest.raises(ValueError):
            Stroke((16, 16), 5.0, (1.0, 0.0), 10.0, strength=1.5)
        with pytest.raises(ValueError):
            Stroke((16, 16), -1.0, (1.0, 0.0), 10.0)


class TestSessionFromDataset:
    def test_identity_on_dataset_items(self, tmp_path):
        config = SynthConfig(samples=2, image_size=32, mc_samples=64, rm_resolution=16, env_count=2, seed=11)
        manifest = generate_dataset(config, tmp_path)
        for item in manifest["items"]:
            session = EditSession(
                item_image(tmp_path, item, "display"),
                item_normals(tmp_path, item),
                item_rm(tmp_path, item, "display"),
            )
            out = shape_reshade(session, session.normals)
            fg = session.image.mask
            assert np.abs(out.rgb - session.image.rgb)[fg].max() < 1e-6
