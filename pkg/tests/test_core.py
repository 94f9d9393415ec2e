"""Orientation parametrization, grid convention, and appearance lookup."""

import numpy as np
import pytest

from lumisphere.core import (
    NormalMap,
    ReflectanceMap,
    disc_mask,
    grid_orientations,
    lookup,
    lookup_batch,
    orientation_to_st,
    pixel_to_st,
    render_sphere,
    shade_from_normals,
    st_to_orientation,
    st_to_pixel,
)


def random_hemisphere(rng, n):
    v = rng.normal(size=(n, 3))
    v[:, 2] = np.abs(v[:, 2])
    return v / np.linalg.norm(v, axis=1, keepdims=True)


class TestOrientation:
    @pytest.mark.parametrize(
        "n,expected",
        [((0, 0, 1), (0, 0)), ((1, 0, 0), (1, 0)), ((0.6, 0, 0.8), (0.6, 0))],
    )
    def test_projection(self, n, expected):
        s, t = orientation_to_st(np.array(n, dtype=float))
        assert (s, t) == pytest.approx(expected)

    def test_rejects_back_facing(self):
        with pytest.raises(ValueError, match="back-facing"):
            orientation_to_st(np.array([0.0, 0.6, -0.8]))

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError, match="unit"):
            orientation_to_st(np.array([0.0, 0.0, 2.0]))

    def test_round_trip_10k(self):
        rng = np.random.default_rng(0)
        n = random_hemisphere(rng, 10_000)
        s, t = orientation_to_st(n)
        back = st_to_orientation(s, t)
        assert np.abs(back - n).max() < 1e-6


class TestGrid:
    def test_center_maps_to_cell_16_16(self):
        assert st_to_pixel(0.0, 0.0, 32) == (16, 16)

    def test_pixel_0_0_center(self):
        # affine formula; cross-checked by brute-force inversion below
        s, t = pixel_to_st(0, 0, 32)
        assert s == pytest.approx(-0.96875)
        assert t == pytest.approx(-0.96875)

    def test_brute_force_inversion(self):
        # every cell center must map back to its own cell
        for res in (2, 7, 32):
            rows, cols = np.meshgrid(np.arange(res), np.arange(res), indexing="ij")
            s, t = pixel_to_st(rows, cols, res)
            ok = s * s + t * t <= 1.0
            r2, c2 = st_to_pixel(s[ok], t[ok], res)
            assert np.array_equal(r2, rows[ok])
            assert np.array_equal(c2, cols[ok])

    def test_rim_cell(self):
        row, col = st_to_pixel(1.0, 0.0, 32)
        # rightmost in-disc cell of the middle row
        disc = disc_mask(32)
        assert disc[row, col]
        assert col == max(np.nonzero(disc[row])[0])

    def test_rejects_outside_disc(self):
        with pytest.raises(ValueError, match="outside"):
            st_to_pixel(0.9, 0.9, 32)

    def test_round_trip_random_points(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-0.7, 0.7, size=(500, 2))
        r1, c1 = st_to_pixel(pts[:, 0], pts[:, 1], 32)
        s, t = pixel_to_st(r1, c1, 32)
        r2, c2 = st_to_pixel(s, t, 32)
        assert np.array_equal(r1, r2) and np.array_equal(c1, c2)


class TestLookup:
    def test_constant_map_reproduced(self):
        rm = ReflectanceMap.full(np.full((32, 32, 3), 0.37))
        rng = np.random.default_rng(2)
        n = random_hemisphere(rng, 200)
        values, valid = lookup_batch(rm, n)
        assert valid.all()
        assert np.abs(values - 0.37).max() < 1e-12

    def test_exact_cell_center(self, smooth_rm):
        n = grid_orientations(32)[20, 18]
        value = lookup(smooth_rm, n)
        assert value == pytest.approx(smooth_rm.radiance[20, 18], abs=1e-12)

    def test_midpoint_weight_redistribution(self):
        # two defined cells a, b side by side, everything else undefined:
        # querying halfway between their centers averages them
        radiance = np.zeros((32, 32, 3))
        defined = np.zeros((32, 32), dtype=bool)
        a, b = np.array([0.2, 0.4, 0.6]), np.array([0.8, 0.6, 0.4])
        radiance[16, 15], radiance[16, 16] = a, b
        defined[16, 15] = defined[16, 16] = True
        rm = ReflectanceMap(radiance, defined)
        s_mid = 0.0  # halfway between the centers of cells 15 and 16 in s
        t = pixel_to_st(16, 15, 32)[1]
        value = lookup(rm, st_to_orientation(s_mid, t))
        assert value == pytest.approx((a + b) / 2, abs=1e-12)

    def test_undefined_neighborhood_signals(self):
        radiance = np.zeros((32, 32, 3))
        defined = np.zeros((32, 32), dtype=bool)
        defined[16, 16] = True
        rm = ReflectanceMap(radiance, defined)
        assert lookup(rm, np.array([0.9, 0.0, np.sqrt(1 - 0.81)])) is None

    def test_continuity_across_cells(self, smooth_rm):
        # dense samples along a line: jumps bounded by the grid Lipschitz bound
        cell = 2.0 / 32
        diff_s = np.abs(np.diff(smooth_rm.radiance, axis=1)).max()
        diff_t = np.abs(np.diff(smooth_rm.radiance, axis=0)).max()
        lip = (diff_s + diff_t) / cell
        s = np.linspace(-0.5, 0.5, 20_001)
        n = st_to_orientation(s, np.full_like(s, 0.17))
        values, valid = lookup_batch(smooth_rm, n)
        assert valid.all()
        step = s[1] - s[0]
        jumps = np.abs(np.diff(values, axis=0)).max()
        assert jumps <= lip * step * 1.01 + 1e-12


class TestRenderSphere:
    def test_constant_uniform_disc(self):
        rm = ReflectanceMap.full(np.full((32, 32, 3), 0.25))
        img = render_sphere(rm, 64)
        assert np.array_equal(img.mask, disc_mask(64))
        assert np.abs(img.rgb[img.mask] - 0.25).max() < 1e-12
        assert not img.undefined.any()

    def test_single_bright_center_cell(self):
        radiance = np.zeros((32, 32, 3))
        defined = np.zeros((32, 32), dtype=bool)
        radiance[16, 16] = 5.0
        defined[16, 16] = True
        rm = ReflectanceMap(radiance, defined)
        img = render_sphere(rm, 32)
        bright = np.unravel_index(np.argmax(img.rgb[..., 0]), (32, 32))
        assert bright == (16, 16)

    def test_round_trip_identity_at_matched_resolution(self, smooth_rm):
        # pixel (i, j) of a size-R render sees exactly cell (i, j)
        img = render_sphere(smooth_rm, 32)
        err = np.abs(img.rgb - smooth_rm.radiance)[smooth_rm.defined]
        assert err.max() < 1e-5


class TestShadeFromNormals:
    def test_matches_render_sphere(self, smooth_rm):
        size = 32
        dirs = grid_orientations(size)
        mask = disc_mask(size)
        nm = NormalMap(np.where(mask[..., None], dirs, 0.0), mask)
        shaded = shade_from_normals(nm, smooth_rm)
        rendered = render_sphere(smooth_rm, size)
        assert np.abs(shaded.rgb - rendered.rgb).max() < 1e-5

    def test_constant_map_constant_foreground(self, smooth_rm):
        rm = ReflectanceMap.full(np.full((32, 32, 3), 0.4))
        rng = np.random.default_rng(3)
        normals = np.zeros((8, 8, 3))
        mask = rng.random((8, 8)) > 0.4
        v = rng.normal(size=(mask.sum(), 3))
        v[:, 2] = np.abs(v[:, 2])
        normals[mask] = v / np.linalg.norm(v, axis=1, keepdims=True)
        img = shade_from_normals(NormalMap(normals, mask), rm)
        assert np.abs(img.rgb[mask] - 0.4).max() < 1e-12

    def test_all_pole_normals_give_center_value(self, smooth_rm):
        normals = np.zeros((4, 4, 3))
        normals[..., 2] = 1.0
        mask = np.ones((4, 4), dtype=bool)
        img = shade_from_normals(NormalMap(normals, mask), smooth_rm)
        expected = lookup(smooth_rm, np.array([0.0, 0.0, 1.0]))
        assert np.abs(img.rgb - expected).max() < 1e-12

    def test_pixel_permutation_invariance(self, smooth_rm):
        rng = np.random.default_rng(4)
        n = random_hemisphere(rng, 64)
        nm1 = NormalMap(n.reshape(8, 8, 3), np.ones((8, 8), dtype=bool))
        perm = rng.permutation(64)
        nm2 = NormalMap(n[perm].reshape(8, 8, 3), np.ones((8, 8), dtype=bool))
        img1 = shade_from_normals(nm1, smooth_rm).rgb.reshape(64, 3)
        img2 = shade_from_normals(nm2, smooth_rm).rgb.reshape(64, 3)
        assert np.array_equal(img1[perm], img2)


class TestImmutability:
    def test_arrays_frozen(self, smooth_rm):
        with pytest.raises(ValueError):
            smooth_rm.radiance[0, 0, 0] = 1.0
        nm = NormalMap(np.zeros((2, 2, 3)), np.zeros((2, 2), dtype=bool))
        with pytest.raises(ValueError):
            nm.normals[0, 0, 0] = 1.0
