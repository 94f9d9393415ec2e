"""Forward model: integration, shapes, exposure, shadow augmentation."""

import math

import numpy as np
import pytest

from lumisphere.brdf import BlinnPhong, Lambert
from lumisphere.core import RadianceImage, grid_orientations, render_sphere
from lumisphere.domain import collect_samples, scatter_max
from lumisphere.envmap import EnvironmentMap, texel_to_direction
from lumisphere.render import (
    Sphere,
    Superellipsoid,
    Torus,
    blob_shadow_factors,
    brdf_convolve,
    procedural_normals,
    reinhard_tonemap,
    shadowed_samples_with_coverage,
)


class TestBrdfConvolve:
    def test_constant_env_lambert_closed_form(self):
        # integral of cos over the hemisphere is pi, cancelling the 1/pi
        env = EnvironmentMap.constant((2.0, 1.0, 0.25))
        rm = brdf_convolve(env, Lambert((0.5, 0.5, 0.5)), 16, 4096, seed=0)
        expected = np.array([1.0, 0.5, 0.125])
        rel = np.abs(rm.radiance[rm.defined] / expected - 1.0)
        assert rel.max() < 0.01

    def test_black_env_black_map(self):
        env = EnvironmentMap.constant((0.0, 0.0, 0.0))
        rm = brdf_convolve(env, Lambert((0.5, 0.5, 0.5)), 16, 256, seed=1)
        assert np.array_equal(rm.radiance[rm.defined], np.zeros_like(rm.radiance[rm.defined]))

    def test_single_texel_mirror_highlight(self):
        # geometric oracle: the highlight cell is the one whose viewer
        # reflection direction falls on the bright texel
        w, h = 64, 32
        radiance = np.zeros((h, w, 3))
        tv, tu = 10, 25
        radiance[tv, tu] = 200.0
        env = EnvironmentMap(radiance)
        mirror = BlinnPhong((0.0, 0.0, 0.0), (0.9, 0.9, 0.9), 2000.0)
        rm = brdf_convolve(env, mirror, 32, 4096, seed=2)

        texel_dir = texel_to_direction(tv, tu, w, h)
        viewer = np.array([0.0, 0.0, 1.0])
        dirs = grid_orientations(32)
        refl = 2.0 * dirs[..., 2:] * dirs - viewer  # reflect viewer about each normal
        refl /= np.linalg.norm(refl, axis=-1, keepdims=True)
        score = np.where(rm.defined, refl @ texel_dir, -1.0)
        expected_cell = np.unravel_index(np.argmax(score), score.shape)

        got_cell = np.unravel_index(np.argmax(rm.radiance[..., 0]), (32, 32))
        assert abs(got_cell[0] - expected_cell[0]) <= 1
        assert abs(got_cell[1] - expected_cell[1]) <= 1
        # compact: a 5x5 box around the peak holds nearly all energy
        r, c = got_cell
        total = rm.radiance[..., 0].sum()
        box = rm.radiance[max(0, r - 2) : r + 3, max(0, c - 2) : c + 3, 0].sum()
        assert box / total > 0.9

    def test_linear_in_environment_matched_seeds(self):
        rng = np.random.default_rng(3)
        e1 = EnvironmentMap(rng.random((8, 16, 3)))
        e2 = EnvironmentMap(rng.random((8, 16, 3)))
        combo = EnvironmentMap(0.3 * e1.radiance + 1.7 * e2.radiance)
        brdf = Lambert((0.6, 0.6, 0.6))
        rm1 = brdf_convolve(e1, brdf, 8, 256, seed=7)
        rm2 = brdf_convolve(e2, brdf, 8, 256, seed=7)
        rmc = brdf_convolve(combo, brdf, 8, 256, seed=7)
        want = 0.3 * rm1.radiance + 1.7 * rm2.radiance
        assert np.abs(rmc.radiance - want).max() < 1e-12

    def test_rotation_equivariance_lambert(self):
        # rotating the environment about z rotates the map disc
        rng = np.random.default_rng(4)
        base = EnvironmentMap(rng.random((16, 32, 3)) + 0.1)
        quarter = base.rotated_z(8)  # 8 texels = 90 degrees
        brdf = Lambert((0.8, 0.8, 0.8))
        rm1 = brdf_convolve(base, brdf, 16, 4096, seed=5)
        rm2 = brdf_convolve(quarter, brdf, 16, 4096, seed=5)
        # phi increases along +u, so rolling texels by +8 rotates directions
        # by -90 degrees; the disc rotates the same way: (s,t) -> (t,-s)
        rot = np.rot90(rm2.radiance, k=-1, axes=(0, 1))
        joint = rm1.defined & np.rot90(rm2.defined, k=-1, axes=(0, 1))
        scale = np.abs(rm1.radiance[joint]).mean()
        assert np.abs(rot[joint] - rm1.radiance[joint]).mean() / scale < 0.02

    def test_deterministic_per_seed(self):
        env = EnvironmentMap.constant((1.0, 1.0, 1.0))
        a = brdf_convolve(env, Lambert((0.5, 0.5, 0.5)), 8, 64, seed=42)
        b = brdf_convolve(env, Lambert((0.5, 0.5, 0.5)), 8, 64, seed=42)
        assert np.array_equal(a.radiance, b.radiance)

    def test_rejects_tiny_sample_count(self):
        with pytest.raises(ValueError):
            brdf_convolve(EnvironmentMap.constant((1, 1, 1)), Lambert((0.5, 0.5, 0.5)), 8, 32)


class TestProceduralNormals:
    def test_sphere_exact(self):
        nm = procedural_normals(Sphere(), 123.0, 32)
        dirs = grid_orientations(32)
        assert np.abs(nm.normals[nm.mask] - dirs[nm.mask]).max() < 1e-12

    def test_unit_length_all_shapes(self):
        for shape in (Sphere(), Torus(0.2, 0.6), Superellipsoid(0.5, 1.2)):
            nm = procedural_normals(shape, 33.0, 48)
            assert nm.mask.sum() > 100
            lengths = np.linalg.norm(nm.normals[nm.mask], axis=-1)
            assert np.abs(lengths - 1.0).max() < 1e-9

    def test_torus_mask_accounting(self):
        # tilted torus: every emitted normal faces the viewer; the mask and
        # the never-emitted back-facing count add up to the full image
        nm = procedural_normals(Torus(0.2, 0.55), 70.0, 64)
        assert (nm.normals[nm.mask][:, 2] >= 0).all()
        assert 0 < nm.mask.sum() < 64 * 64

    def test_superellipsoid_mirror_symmetry(self):
        # the shape is even in x, so a half-turn about y reproduces the map
        # mirrored in x with the x component negated
        base = procedural_normals(Superellipsoid(0.6, 0.9), 0.0, 48)
        half_turn = procedural_normals(Superellipsoid(0.6, 0.9), 180.0, 48)
        mirrored = base.normals[:, ::-1].copy()
        mirrored[..., 0] *= -1
        mirror_mask = base.mask[:, ::-1]
        assert np.array_equal(half_turn.mask, mirror_mask)
        assert np.abs(half_turn.normals[half_turn.mask] - mirrored[mirror_mask]).max() < 1e-7

    def test_bad_params(self):
        with pytest.raises(ValueError):
            Torus(0.7, 0.5)
        with pytest.raises(ValueError):
            Superellipsoid(0.0, 1.0)


class TestReinhard:
    def test_constant_luminance_closed_form(self):
        img = RadianceImage(np.full((8, 8, 3), 2.5), np.ones((8, 8), dtype=bool))
        out = reinhard_tonemap(img, key=0.5)
        # gray input: luminance equals the channel value; l = key exactly,
        # display luminance key / (1 + key)
        assert np.abs(out.rgb - 0.5 / 1.5).max() < 1e-4

    def test_black_image_passthrough(self):
        img = RadianceImage(np.zeros((4, 4, 3)), np.ones((4, 4), dtype=bool))
        out = reinhard_tonemap(img, key=0.5)
        assert np.array_equal(out.rgb, img.rgb)

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        rgb = rng.random((8, 8, 3)) * 4.0 + 1.0  # bright: the log delta is negligible
        mask = np.ones((8, 8), dtype=bool)
        out1 = reinhard_tonemap(RadianceImage(rgb, mask), 0.45)
        out2 = reinhard_tonemap(RadianceImage(2.0 * rgb, mask), 0.45)
        assert np.abs(out1.rgb - out2.rgb).max() < 1e-4

    def test_output_below_one(self):
        rng = np.random.default_rng(6)
        rgb = rng.random((8, 8, 3)) * 1000.0
        rgb[:, :, 0] *= 10.0  # saturated colors stress the per-channel rescale
        out = reinhard_tonemap(RadianceImage(rgb, np.ones((8, 8), dtype=bool)), 0.6)
        assert out.rgb.max() < 1.0
        assert out.rgb.min() >= 0.0

    def test_rejects_bad_key(self):
        img = RadianceImage(np.ones((2, 2, 3)), np.ones((2, 2), dtype=bool))
        with pytest.raises(ValueError):
            reinhard_tonemap(img, 0.0)


class TestShadows:
    def test_blob_factors_only_darken(self):
        rng = np.random.default_rng(7)
        factors = blob_shadow_factors(32, 32, rng, darken=0.3)
        assert ((factors == 1.0) | (factors == 0.3)).all()

    def test_coverage_guarantee_bit_equal(self, smooth_rm):
        img = render_sphere(smooth_rm, 32)
        nm = procedural_normals(Sphere(), 0.0, 32)
        samples = collect_samples(img, nm)
        rng = np.random.default_rng(8)
        shadowed, factors = shadowed_samples_with_coverage(samples, 32, 5.0, rng, 0.4, 0.35)
        assert (factors <= 1.0).all() and (factors > 0).all()
        assert (factors < 1.0).sum() <= 0.4 * len(samples)
        clean = scatter_max(samples, 32, eps_deg=5.0)
        dark = scatter_max(shadowed, 32, eps_deg=5.0)
        assert np.array_equal(clean.defined, dark.defined)
        assert np.array_equal(clean.radiance, dark.radiance)
