import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foveate.retina import (
    build_grid,
    ensure_image,
    from_logpolar,
    logpolar_coords,
    sample_bilinear,
    to_logpolar,
)

from reference import (
    ref_bilinear_point,
    ref_logpolar_coords,
    ref_to_logpolar,
    smooth_random_image,
)


class TestLogpolarCoords:
    def test_unit_radius_positive_x(self):
        assert logpolar_coords(1.0, 0.0, (0.0, 0.0)) == pytest.approx((0.0, 0.0))

    def test_inner_radius_positive_y(self):
        rho, theta = logpolar_coords(0.0, 2.0**-5, (0.0, 0.0))
        assert rho == pytest.approx(-5.0)
        assert theta == pytest.approx(math.pi / 2)

    def test_half_radius_negative_x(self):
        rho, theta = logpolar_coords(-0.5, 0.0, (0.0, 0.0))
        assert rho == pytest.approx(-1.0)
        assert theta == pytest.approx(math.pi)

    def test_degenerate_point_raises(self):
        with pytest.raises(ValueError):
            logpolar_coords(0.25, -0.5, (0.25, -0.5))

    def test_theta_range(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            x, y = rng.uniform(-1, 1, 2)
            if (x, y) == (0.0, 0.0):
                continue
            rho, theta = logpolar_coords(x, y, (0.0, 0.0))
            assert 0.0 <= theta < 2 * math.pi
            ref = ref_logpolar_coords(x, y, 0.0, 0.0)
            assert rho == pytest.approx(ref[0])
            assert theta == pytest.approx(ref[1])

    @given(
        rho=st.floats(-5, 0),
        theta=st.floats(0, 2 * math.pi, exclude_max=True),
    )
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_through_cartesian(self, rho, theta):
        x = 2.0**rho * math.cos(theta)
        y = 2.0**rho * math.sin(theta)
        got_rho, got_theta = logpolar_coords(x, y, (0.0, 0.0))
        assert abs(got_rho - rho) < 1e-9
        # wrap-aware azimuth comparison
        d = abs(got_theta - theta)
        assert min(d, 2 * math.pi - d) < 1e-9


class TestBuildGrid:
    def test_default_paper_grid(self):
        g = build_grid()
        assert g.n_rho == 224 and g.n_theta == 224
        assert g.rows[0] == -5.0 and g.rows[-1] == 0.0
        assert np.all(np.diff(g.rows) > 0)

    def test_small_grid_values(self):
        g = build_grid(4, 4, -5, 0, (0.0, 0.0))
        np.testing.assert_allclose(g.rows, [-5.0, -10 / 3, -5 / 3, 0.0])
        np.testing.assert_allclose(g.cols, [0.0, math.pi / 2, math.pi, 3 * math.pi / 2])

    def test_degenerate_range_rejected(self):
        with pytest.raises(ValueError):
            build_grid(2, 2, 0, 0, (0.0, 0.0))

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            build_grid(1, 4, -5, 0, (0.0, 0.0))

    def test_cols_cover_without_duplicate(self):
        g = build_grid(8, 8, -3, 0, (0.0, 0.0))
        assert g.cols[0] == 0.0
        assert g.cols[-1] == pytest.approx(2 * math.pi * (1 - 1 / 8))

    def test_monotone_acuity(self):
        # arc length covered by one cell grows strictly with the row index
        g = build_grid(32, 16, -5, 0, (0.0, 0.0))
        arc = 2.0**g.rows * (2 * math.pi / g.n_theta)
        assert np.all(np.diff(arc) > 0)


class TestSampleBilinear:
    def test_exact_pixel_centers(self):
        rng = np.random.default_rng(1)
        img = rng.random((5, 7, 3))
        i, j = 3, 2
        pt = [(2 * j + 1) / 7 - 1, (2 * i + 1) / 5 - 1]
        got = sample_bilinear(img, [pt], fill=0.0)
        np.testing.assert_allclose(got[0], img[i, j], atol=1e-12)

    def test_midpoint_average(self):
        img = np.zeros((1, 2, 1))
        img[0, 0, 0] = 0.2
        img[0, 1, 0] = 0.8
        # midway between the two pixel centers
        got = sample_bilinear(img, [(0.0, 0.0)], fill=0.0)
        assert got[0, 0] == pytest.approx(0.5)

    def test_far_outside_returns_fill(self):
        img = np.ones((4, 4, 1))
        got = sample_bilinear(img, [(5.0, 5.0)], fill=0.25)
        assert got[0, 0] == pytest.approx(0.25)

    def test_matches_reference_on_random_points(self):
        rng = np.random.default_rng(2)
        img = rng.random((64, 64, 3))
        pts = rng.uniform(-1.3, 1.3, size=(1000, 2))
        got = sample_bilinear(img, pts, fill=0.5)
        for k in range(len(pts)):
            ref = ref_bilinear_point(img, pts[k, 0], pts[k, 1], 0.5)
            np.testing.assert_allclose(got[k], ref, atol=1e-6)

    def test_rejects_bad_fill(self):
        with pytest.raises(ValueError):
            sample_bilinear(np.zeros((2, 2, 1)), [(0, 0)], fill=1.5)


class TestToLogpolar:
    def test_constant_image_stays_constant(self):
        img = np.full((32, 32, 3), 0.5)
        g = build_grid(16, 16, -5, 0, (0.0, 0.0))
        lp = to_logpolar(img, g, fill=0.5)
        np.testing.assert_allclose(lp, 0.5, atol=1e-12)

    def test_half_plane_geometry(self):
        img = np.zeros((64, 64, 1))
        img[:, 32:] = 1.0  # white right half
        g = build_grid(16, 16, -4, -0.2, (0.0, 0.0))
        lp = to_logpolar(img, g, fill=0.5)
        assert np.all(lp[:, 0] > 0.95)  # theta = 0 points right
        assert np.all(lp[:, 8] < 0.05)  # theta = pi points left

    def test_matches_composed_oracle(self):
        rng = np.random.default_rng(3)
        img = smooth_random_image(rng, 48, 48)
        g = build_grid(12, 10, -4, 0, (0.1, -0.2))
        lp = to_logpolar(img, g, fill=0.5)
        ref = ref_to_logpolar(img, g.rows, g.cols, 0.1, -0.2, 0.5)
        np.testing.assert_allclose(lp, ref, atol=1e-9)


class TestFromLogpolar:
    def test_constant_roundtrip_inside_circle(self):
        img = np.full((64, 64, 1), 0.75)
        g = build_grid(32, 32, -5, 0, (0.0, 0.0))
        rec = from_logpolar(to_logpolar(img, g, 0.75), g, 64, 64, fill=0.75)
        np.testing.assert_allclose(rec, 0.75, atol=1e-9)
        # with a different fill, the interior away from the rim is still flat
        rec = from_logpolar(to_logpolar(img, g, 0.5), g, 64, 64, fill=0.5)
        xs = (2 * np.arange(64) + 1) / 64 - 1
        r = np.hypot(xs[None, :], xs[:, None])
        inside = r <= 0.8
        np.testing.assert_allclose(rec[inside], 0.75, atol=1e-9)

    def test_outside_unit_circle_gets_fill(self):
        img = np.full((64, 64, 1), 1.0)
        g = build_grid(32, 32, -5, 0, (0.0, 0.0))
        rec = from_logpolar(to_logpolar(img, g, 0.5), g, 64, 64, fill=0.25)
        assert rec[0, 0, 0] == pytest.approx(0.25)  # corner, r = sqrt(2) > 1
        assert rec[63, 0, 0] == pytest.approx(0.25)

    def test_shape_mismatch_rejected(self):
        g = build_grid(8, 8, -5, 0, (0.0, 0.0))
        with pytest.raises(ValueError):
            from_logpolar(np.zeros((4, 8, 1)), g, 16, 16, fill=0.5)

    def test_blurred_roundtrip_psnr(self):
        from reference import psnr

        rng = np.random.default_rng(4)
        img = smooth_random_image(rng, 256, 256, sigma=2.0)
        g = build_grid()
        rec = from_logpolar(to_logpolar(img, g, 0.5), g, 256, 256, fill=0.5)
        xs = (2 * np.arange(256) + 1) / 256 - 1
        r = np.hypot(xs[None, :], xs[:, None])
        annulus = (r >= 2.0**-4) & (r <= 0.5)
        assert psnr(img[annulus], rec[annulus]) >= 25.0


class TestEnsureImage:
    def test_grayscale_gets_channel_axis(self):
        img = ensure_image(np.zeros((3, 4)))
        assert img.shape == (3, 4, 1)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            ensure_image(np.full((2, 2, 1), 1.5))

    def test_bad_channel_count_rejected(self):
        with pytest.raises(ValueError):
            ensure_image(np.zeros((2, 2, 4)))
