"""Model bundle pieces: thresholding, transform builders, serialization."""

import numpy as np
import pytest
import scipy.fft

from sparsect.errors import FormatError, NumericalError
from sparsect.model import (
    ModelBundle,
    dct2_matrix,
    hard_threshold,
    load_model,
    random_orthogonal,
    save_model,
    unitarity_defect,
)


class TestHardThreshold:
    def test_zeros_below_keeps_above(self):
        values = np.array([-3.0, -1.0, 0.0, 0.5, 2.0])
        np.testing.assert_array_equal(
            hard_threshold(values, 1.5), np.array([-3.0, 0.0, 0.0, 0.0, 2.0])
        )

    def test_boundary_magnitude_is_kept(self):
        # Entries exactly at the threshold survive with their sign.
        values = np.array([1.5, -1.5, 1.4999999])
        np.testing.assert_array_equal(
            hard_threshold(values, 1.5), np.array([1.5, -1.5, 0.0])
        )

    def test_zero_threshold_is_identity(self):
        rng = np.random.default_rng(0)
        values = rng.standard_normal((4, 5))
        np.testing.assert_array_equal(hard_threshold(values, 0.0), values)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            hard_threshold(np.ones(3), -1.0)


class TestDct2Matrix:
    @pytest.mark.parametrize("n", [4, 16, 64])
    def test_unitary(self, n):
        d = dct2_matrix(n)
        assert unitarity_defect(d) <= 1e-12

    def test_matches_separable_reference_transform(self):
        # Applying the matrix to a raveled patch must equal the orthonormal
        # 2D type-II DCT of the patch.
        rng = np.random.default_rng(1)
        patch = rng.standard_normal((8, 8))
        d = dct2_matrix(64)
        got = (d @ patch.ravel()).reshape(8, 8)
        want = scipy.fft.dctn(patch, type=2, norm="ortho")
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_first_row_is_constant(self):
        d = dct2_matrix(16)
        np.testing.assert_allclose(d[0], 0.25 * np.ones(16), atol=1e-15)

    def test_rejects_non_square_dimension(self):
        with pytest.raises(ValueError):
            dct2_matrix(12)


class TestRandomOrthogonal:
    def test_unitary_and_deterministic(self):
        a = random_orthogonal(16, 3)
        b = random_orthogonal(16, 3)
        np.testing.assert_array_equal(a, b)
        assert unitarity_defect(a) <= 1e-12

    def test_different_seeds_differ(self):
        assert not np.array_equal(random_orthogonal(8, 0), random_orthogonal(8, 1))


def make_bundle(layers=2, clusters=(3, 2), n=16, seed=0):
    rng = np.random.default_rng(seed)
    transforms = [
        np.stack([random_orthogonal(n, rng) for _ in range(clusters[l])])
        for l in range(layers)
    ]
    thresholds = np.linspace(10.0, 5.0, layers)
    return ModelBundle(
        transforms=transforms, thresholds=thresholds,
        patch_side=int(np.sqrt(n)),
    )


class TestModelBundle:
    def test_validate_passes_for_unitary_banks(self):
        make_bundle().validate()

    def test_validate_rejects_non_unitary(self):
        bundle = make_bundle()
        bundle.transforms[0][1][0, 0] += 1e-3
        with pytest.raises(NumericalError):
            bundle.validate()

    def test_copy_is_deep(self):
        bundle = make_bundle()
        dup = bundle.copy()
        dup.transforms[0][0][0, 0] += 1.0
        assert bundle.transforms[0][0][0, 0] != dup.transforms[0][0][0, 0]


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        bundle = make_bundle(layers=3, clusters=(2, 4, 1))
        path = tmp_path / "model.mcst"
        save_model(path, bundle)
        back = load_model(path)
        assert back.layers == 3
        assert back.clusters_per_layer == [2, 4, 1]
        assert back.patch_side == bundle.patch_side
        np.testing.assert_array_equal(back.thresholds, bundle.thresholds)
        for l in range(3):
            np.testing.assert_array_equal(back.transforms[l], bundle.transforms[l])

    def test_header_magic(self, tmp_path):
        path = tmp_path / "model.mcst"
        save_model(path, make_bundle())
        assert path.read_bytes()[:5] == b"MCST1"

    def test_corrupt_transform_rejected_on_load(self, tmp_path):
        path = tmp_path / "model.mcst"
        save_model(path, make_bundle())
        raw = bytearray(path.read_bytes())
        # Flip the exponent byte of the last transform entry.
        raw[-2] ^= 0x7F
        path.write_bytes(bytes(raw))
        with pytest.raises((NumericalError, FormatError)):
            load_model(path)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "model.mcst"
        save_model(path, make_bundle())
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(FormatError):
            load_model(path)

    def test_save_is_byte_deterministic(self, tmp_path):
        bundle = make_bundle()
        a = tmp_path / "a.mcst"
        b = tmp_path / "b.mcst"
        save_model(a, bundle)
        save_model(b, bundle.copy())
        assert a.read_bytes() == b.read_bytes()
