import numpy as np
import pytest

from loopsr.dctquant import (
    CHROMA_BASE_TABLE,
    LUMA_BASE_TABLE,
    dct_roundtrip,
    scaled_table,
)
from loopsr.errors import ConfigError, ContractViolation
from loopsr.image import GRAY, YCBCR, Image, constant, rgb_to_ycbcr, ycbcr_to_rgb
from loopsr.ops import CompressOp, compress_roundtrip

from conftest import random_image


def reference_block_roundtrip(block, table):
    """Independent oracle: explicit orthonormal DCT-II matrix, no scipy.fft."""
    n = 8
    mat = np.zeros((n, n))
    for u in range(n):
        for x in range(n):
            c = np.sqrt(1.0 / n) if u == 0 else np.sqrt(2.0 / n)
            mat[u, x] = c * np.cos((2 * x + 1) * u * np.pi / (2 * n))
    coefs = mat @ block @ mat.T
    coefs = np.round(coefs / table) * table
    return mat.T @ coefs @ mat


class TestQualityScaling:
    def test_q50_is_base_table(self):
        np.testing.assert_array_equal(scaled_table(LUMA_BASE_TABLE, 50), LUMA_BASE_TABLE)
        np.testing.assert_array_equal(scaled_table(CHROMA_BASE_TABLE, 50), CHROMA_BASE_TABLE)

    def test_q10_dc_entry(self):
        assert scaled_table(LUMA_BASE_TABLE, 10)[0, 0] == 80  # (16*500+50)//100

    def test_q100_all_ones(self):
        assert (scaled_table(LUMA_BASE_TABLE, 100) == 1).all()
        assert (scaled_table(CHROMA_BASE_TABLE, 100) == 1).all()

    def test_entries_clamped_to_255(self):
        assert scaled_table(LUMA_BASE_TABLE, 1).max() == 255

    def test_quality_bounds(self):
        for bad in (0, 101, -5):
            with pytest.raises(ConfigError):
                scaled_table(LUMA_BASE_TABLE, bad)
            with pytest.raises(ConfigError):
                CompressOp("dct", quality=bad)


class TestRoundtrip:
    def test_matches_reference_oracle_on_gray(self, rng):
        img = Image(rng.random((1, 16, 16), dtype=np.float32), GRAY)
        out = dct_roundtrip(img, quality=25, chroma_subsample=False)
        table = scaled_table(LUMA_BASE_TABLE, 25)
        plane = img.data[0].astype(np.float64) * 255.0 - 128.0
        expected = np.empty_like(plane)
        for by in range(2):
            for bx in range(2):
                sl = np.s_[by * 8:(by + 1) * 8, bx * 8:(bx + 1) * 8]
                expected[sl] = reference_block_roundtrip(plane[sl], table)
        expected = (expected + 128.0) / 255.0
        np.testing.assert_allclose(out.data[0], expected, atol=1e-6)

    def test_q100_per_block_rms_bound(self, rng):
        # unit-step coefficient rounding: per-block RMS error <= 0.5 under
        # an orthonormal transform, i.e. 0.5/255 in the [0,1] domain
        for _ in range(50):
            img = Image(rng.random((1, 8, 8), dtype=np.float32), GRAY)
            out = dct_roundtrip(img, quality=100, chroma_subsample=False)
            rms = float(np.sqrt(np.mean((out.data - img.data) ** 2)))
            assert rms <= 0.5 / 255

    def test_rmse_monotone_in_quality(self, rng):
        img = random_image(rng, 32, 32)
        rmse = {}
        for q in (10, 50, 90):
            out = compress_roundtrip(img, CompressOp("dct", quality=q))
            rmse[q] = float(np.sqrt(np.mean((out.data - img.data) ** 2)))
        assert rmse[10] >= rmse[50] + 1e-9
        assert rmse[50] >= rmse[90] + 1e-9

    def test_shape_preserved_odd_sizes(self, rng):
        for w, h in ((13, 7), (8, 9), (5, 5), (16, 11)):
            img = random_image(rng, w, h)
            for sub in (False, True):
                out = compress_roundtrip(img, CompressOp("dct", quality=30,
                                                         chroma_subsample=sub))
                assert out.shape == img.shape

    def test_gray_input_uses_luma_path(self, rng):
        img = Image(rng.random((1, 24, 24), dtype=np.float32), GRAY)
        out = compress_roundtrip(img, CompressOp("dct", quality=10))
        assert out.color_space == GRAY
        assert out.shape == img.shape

    def test_constant_image_survives(self):
        # constant blocks have a single DC coefficient; quantization moves
        # it by at most half a step
        img = constant(0.42, 24, 16, 3)
        out = compress_roundtrip(img, CompressOp("dct", quality=50))
        assert np.abs(out.data - img.data).max() < 0.05
        assert np.ptp(out.data, axis=(1, 2)).max() < 1e-3

    def test_deterministic(self, rng):
        img = random_image(rng, 24, 24)
        op = CompressOp("dct", quality=10)
        a = compress_roundtrip(img, op)
        b = compress_roundtrip(img, op)
        np.testing.assert_array_equal(a.data, b.data)

    def test_rejects_ycbcr_input(self, rng):
        ycc = rgb_to_ycbcr(random_image(rng))
        with pytest.raises(ContractViolation):
            dct_roundtrip(ycc, quality=50)

    def test_subsampling_actually_degrades_chroma(self):
        # an image whose structure lives only in chroma loses more under 4:2:0
        ycc = np.full((3, 16, 16), 0.5, dtype=np.float32)
        checker = (np.indices((16, 16)).sum(axis=0) % 2).astype(np.float32)
        ycc[1] = 0.35 + 0.3 * checker
        rgb = ycbcr_to_rgb(Image(ycc, YCBCR))
        err = {}
        for sub in (True, False):
            out = compress_roundtrip(rgb, CompressOp("dct", quality=90,
                                                     chroma_subsample=sub))
            err[sub] = float(np.abs(out.data - rgb.data).mean())
        assert err[True] > err[False]
