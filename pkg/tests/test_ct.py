"""Tests for the parallel-beam scanner: projector, noise model, and FBP."""

import numpy as np
import pytest

from sparsect.ctscan import (
    GeometryError,
    NoiseModel,
    ScanGeometry,
    back_project,
    counts_to_sinogram,
    counts_to_weights,
    fbp,
    forward_project,
    make_weighted_scan,
    ramp_filter_response,
    simulate_counts,
    sqs_diagonal,
)
from sparsect.phantoms import disk


def dense_line_integral(image, geometry, view, bin_index, oversample=40000):
    """Riemann-sum line integral along one ray, independent of the tracer."""
    size = geometry.image_size
    delta = geometry.pixel_size
    half = size * delta / 2.0
    s_max = np.hypot(size * delta, size * delta)
    theta = geometry.angles[view]
    ct, st = np.cos(theta), np.sin(theta)
    t = (bin_index - 0.5 * (geometry.n_bins - 1)) * geometry.det_spacing
    px0 = t * ct + s_max * st
    py0 = t * st - s_max * ct
    alphas = (np.arange(oversample) + 0.5) / oversample
    xs = px0 - alphas * 2.0 * s_max * st
    ys = py0 + alphas * 2.0 * s_max * ct
    cols = np.floor((xs + half) / delta).astype(int)
    rows = np.floor((half - ys) / delta).astype(int)
    ok = (cols >= 0) & (cols < size) & (rows >= 0) & (rows < size)
    return float(image[rows[ok], cols[ok]].sum() * 2.0 * s_max / oversample)


class TestScanGeometry:
    def test_angles_cover_half_turn(self):
        g = ScanGeometry(image_size=8, n_views=4, n_bins=16)
        np.testing.assert_allclose(g.angles, [0, np.pi / 4, np.pi / 2, 3 * np.pi / 4])

    def test_default_detector_covers_image(self):
        assert ScanGeometry().covers_image()
        assert not ScanGeometry(n_bins=90).covers_image()

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(image_size=0),
            dict(n_views=0),
            dict(n_bins=-1),
            dict(pixel_size=0.0),
            dict(det_spacing=-2.0),
        ],
    )
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(GeometryError):
            ScanGeometry(**kwargs)


class TestForwardProject:
    def test_single_pixel_axis_aligned_views(self):
        # Odd size keeps the central bin's ray off pixel boundaries.
        g = ScanGeometry(image_size=15, pixel_size=2.0, n_views=2, n_bins=31,
                         det_spacing=2.0)
        image = np.zeros(g.image_shape)
        row, col = 2, 5
        image[row, col] = 3.0
        sino = forward_project(image, g)
        center = (g.n_bins - 1) // 2
        # View 0 integrates along y at x = t: one bin, full pixel chord.
        x_c = (col - (g.image_size - 1) / 2) * g.pixel_size
        bin_x = center + int(round(x_c / g.det_spacing))
        assert sino[0, bin_x] == pytest.approx(3.0 * g.pixel_size, rel=1e-12)
        assert np.count_nonzero(sino[0]) == 1
        # View 1 (90 degrees) integrates along x at y = t; row 0 sits on top.
        y_c = ((g.image_size - 1) / 2 - row) * g.pixel_size
        bin_y = center + int(round(y_c / g.det_spacing))
        assert sino[1, bin_y] == pytest.approx(3.0 * g.pixel_size, rel=1e-12)
        assert np.count_nonzero(sino[1]) == 1

    def test_matches_dense_sampling(self):
        g = ScanGeometry(image_size=16, pixel_size=1.5, n_views=7, n_bins=25,
                         det_spacing=1.4)
        rng = np.random.default_rng(0)
        image = rng.random(g.image_shape)
        sino = forward_project(image, g)
        for view, bin_index in [(0, 12), (1, 8), (2, 12), (3, 17), (5, 12), (6, 4)]:
            want = dense_line_integral(image, g, view, bin_index)
            assert sino[view, bin_index] == pytest.approx(want, abs=0.05, rel=0.01)

    def test_uniform_square_vertical_chords(self):
        # Every vertical ray inside the square sees the full image height.
        g = ScanGeometry(image_size=11, pixel_size=2.0, n_views=1, n_bins=9,
                         det_spacing=2.0)
        sino = forward_project(np.ones(g.image_shape), g)
        np.testing.assert_allclose(sino[0], g.image_size * g.pixel_size, rtol=1e-12)

    def test_rejects_wrong_image_shape(self):
        g = ScanGeometry(image_size=8, n_views=3, n_bins=12)
        with pytest.raises(GeometryError):
            forward_project(np.zeros((8, 9)), g)


class TestAdjointness:
    @pytest.mark.parametrize(
        "geometry",
        [
            ScanGeometry(image_size=13, pixel_size=2.0, n_views=11, n_bins=21,
                         det_spacing=1.8),
            ScanGeometry(image_size=16, pixel_size=1.0, n_views=24, n_bins=24,
                         det_spacing=1.0),
            ScanGeometry(image_size=32, pixel_size=2.0, n_views=30, n_bins=47,
                         det_spacing=2.0),
        ],
    )
    def test_inner_products_agree(self, geometry):
        rng = np.random.default_rng(geometry.image_size)
        for _ in range(5):
            x = rng.standard_normal(geometry.image_shape)
            y = rng.standard_normal(geometry.sinogram_shape)
            lhs = float(np.sum(forward_project(x, geometry) * y))
            rhs = float(np.sum(x * back_project(y, geometry)))
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_back_project_rejects_wrong_shape(self):
        g = ScanGeometry(image_size=8, n_views=3, n_bins=12)
        with pytest.raises(GeometryError):
            back_project(np.zeros((3, 11)), g)

    def test_sqs_diagonal_nonnegative(self):
        g = ScanGeometry(image_size=16, pixel_size=2.0, n_views=12, n_bins=24)
        weights = np.full(g.sinogram_shape, 0.5)
        d = sqs_diagonal(g, weights)
        assert d.shape == g.image_shape
        assert np.all(d >= 0)
        assert d.max() > 0


class TestChordLength:
    def test_disk_central_chords(self):
        # 128 pixels keep the staircase boundary error of the pixelated
        # disk under the 2 percent budget.
        g = ScanGeometry(image_size=128, pixel_size=2.0, n_views=12, n_bins=185,
                         det_spacing=2.0)
        image = disk(g.image_size, radius=0.6, value=1.0)
        radius_mm = 0.6 * (g.image_size / 2) * g.pixel_size
        sino = forward_project(image, g)
        center = (g.n_bins - 1) // 2
        chords = sino[:, center]
        np.testing.assert_allclose(chords, 2.0 * radius_mm, rtol=0.02)


class TestNoise:
    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            NoiseModel(incident_photons=0)
        with pytest.raises(ValueError):
            NoiseModel(electronic_sigma=-1.0)
        with pytest.raises(ValueError):
            NoiseModel(attenuation_per_unit=0.0)

    def test_counts_are_seed_deterministic(self):
        g = ScanGeometry(image_size=16, pixel_size=2.0, n_views=6, n_bins=24)
        image = disk(g.image_size, value=800.0)
        noise = NoiseModel()
        a = simulate_counts(image, g, noise, seed=3)
        b = simulate_counts(image, g, noise, seed=3)
        c = simulate_counts(image, g, noise, seed=4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_moments_match_poisson_plus_gaussian(self):
        # One view through a uniform square: every ray has the same length,
        # so the counts are i.i.d. and sample moments have known error bars.
        g = ScanGeometry(image_size=15, pixel_size=2.0, n_views=1, n_bins=5000,
                         det_spacing=29.0 / 5000)
        value = 500.0
        image = np.full(g.image_shape, value)
        noise = NoiseModel(incident_photons=1.0e4, electronic_sigma=5.0)
        depth = noise.attenuation_per_unit * g.image_size * g.pixel_size * value
        mean_true = noise.incident_photons * np.exp(-depth)
        var_true = mean_true + noise.electronic_sigma ** 2
        counts = simulate_counts(image, g, noise, seed=11).ravel()
        n = counts.size
        se_mean = np.sqrt(var_true / n)
        assert abs(counts.mean() - mean_true) < 4 * se_mean
        se_var = var_true * np.sqrt(2.0 / (n - 1))
        assert abs(counts.var(ddof=1) - var_true) < 4 * se_var

    def test_log_transform_inverts_clean_counts(self):
        noise = NoiseModel(incident_photons=1e4)
        sino = np.array([[0.0, 1000.0, 30000.0]])
        clean = noise.incident_photons * np.exp(-noise.attenuation_per_unit * sino)
        np.testing.assert_allclose(counts_to_sinogram(clean, noise), sino, atol=1e-9)

    def test_log_transform_floors_bad_counts(self):
        noise = NoiseModel(incident_photons=1e4)
        worst = np.log(noise.incident_photons / 0.1) / noise.attenuation_per_unit
        got = counts_to_sinogram(np.array([[0.0, -3.0, 0.05]]), noise)
        np.testing.assert_allclose(got, worst)

    def test_weights_formula_and_caps(self):
        noise = NoiseModel(incident_photons=1e4, electronic_sigma=5.0)
        counts = np.array([[-5.0, 0.0, 100.0, 1.0e9]])
        w = counts_to_weights(counts, noise)
        assert w[0, 0] == 0.0
        assert w[0, 1] == 0.0
        assert w[0, 2] == pytest.approx(100.0 ** 2 / (100.0 + 25.0))
        assert w[0, 3] == noise.incident_photons

    def test_weighted_scan_is_consistent(self):
        g = ScanGeometry(image_size=16, pixel_size=2.0, n_views=6, n_bins=24)
        image = disk(g.image_size, value=700.0)
        noise = NoiseModel()
        scan = make_weighted_scan(image, g, noise, seed=5)
        np.testing.assert_array_equal(
            scan.sinogram, counts_to_sinogram(scan.counts, noise)
        )
        np.testing.assert_array_equal(
            scan.weights, counts_to_weights(scan.counts, noise)
        )


class TestFbp:
    def test_filter_matches_ramp_at_low_frequencies(self):
        d = 2.0
        n_pad = 512
        response = ramp_filter_response(n_pad, d, cutoff=1.0)
        freqs = np.fft.rfftfreq(n_pad, d)
        assert response.shape == freqs.shape
        # The truncated tap series leaves a DC leak that shrinks like 1/n_pad.
        assert 0.0 <= response[0] <= 1.2 * 2.0 / (np.pi ** 2 * d * n_pad)
        # Window is ~1 near DC, so the response approximates |f| there.
        for k in range(2, 13):
            assert response[k] == pytest.approx(freqs[k], rel=0.02)

    def test_filter_cutoff_zeroes_high_frequencies(self):
        response = ramp_filter_response(256, 2.0, cutoff=0.4)
        freqs = np.fft.rfftfreq(256, 2.0)
        nyquist = freqs[-1]
        assert np.all(response[freqs > 0.4 * nyquist + 1e-12] == 0.0)

    def test_filter_rejects_bad_cutoff(self):
        with pytest.raises(ValueError):
            ramp_filter_response(64, 2.0, cutoff=0.0)
        with pytest.raises(ValueError):
            ramp_filter_response(64, 2.0, cutoff=1.5)

    def test_disk_amplitude_recovered(self):
        g = ScanGeometry(image_size=64, pixel_size=2.0, n_views=120, n_bins=93,
                         det_spacing=2.0)
        image = disk(g.image_size, radius=0.6, value=1000.0)
        recon = fbp(forward_project(image, g), g, cutoff=1.0)
        coords = (np.arange(g.image_size) - (g.image_size - 1) / 2)
        rr = np.hypot(coords[:, None], coords[None, :]) / (g.image_size / 2)
        inside = rr < 0.45
        outside = rr > 0.85
        assert recon[inside].mean() == pytest.approx(1000.0, rel=0.02)
        assert abs(recon[outside].mean()) < 20.0

    def test_rejects_wrong_sinogram_shape(self):
        g = ScanGeometry(image_size=8, n_views=3, n_bins=12)
        with pytest.raises(GeometryError):
            fbp(np.zeros((4, 12)), g)
