import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loopsr.errors import ContractViolation, ImageTooSmallError, PpmParseError
from loopsr.image import (
    GRAY,
    RGB,
    YCBCR,
    Image,
    abs_diff,
    constant,
    crop_to_multiple,
    load_ppm,
    rgb_to_ycbcr,
    save_ppm,
    ycbcr_to_rgb,
)

from conftest import grid_image, random_image


class TestImageInvariants:
    def test_rejects_bad_channel_count(self):
        with pytest.raises(ContractViolation):
            Image(np.zeros((2, 4, 4), dtype=np.float32), RGB)

    def test_rejects_gray_tag_on_three_channels(self):
        with pytest.raises(ContractViolation):
            Image(np.zeros((3, 4, 4), dtype=np.float32), GRAY)

    def test_rejects_color_tag_on_one_channel(self):
        with pytest.raises(ContractViolation):
            Image(np.zeros((1, 4, 4), dtype=np.float32), RGB)

    def test_rejects_nan(self):
        data = np.zeros((1, 2, 2), dtype=np.float32)
        data[0, 0, 0] = np.nan
        with pytest.raises(ContractViolation):
            Image(data, GRAY)

    def test_rejects_inf(self):
        data = np.zeros((1, 2, 2), dtype=np.float32)
        data[0, 1, 1] = np.inf
        with pytest.raises(ContractViolation):
            Image(data, GRAY)

    def test_data_is_immutable(self):
        img = constant(0.5, 4, 4)
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1.0

    def test_does_not_alias_caller_array(self):
        arr = np.zeros((1, 2, 2), dtype=np.float32)
        img = Image(arr, GRAY)
        arr[0, 0, 0] = 9.0
        assert img.data[0, 0, 0] == 0.0


class TestLoadPpm:
    def test_pgm_endpoint_mapping(self):
        img = load_ppm(b"P5 2 1 255 " + bytes([0, 255]))
        assert img.color_space == GRAY
        assert img.width == 2 and img.height == 1
        np.testing.assert_array_equal(img.data[0, 0], [0.0, 1.0])

    def test_ppm_constant_128(self):
        img = load_ppm(b"P6 2 2 255 " + bytes([128] * 12))
        assert img.color_space == RGB
        np.testing.assert_allclose(img.data, 128 / 255, atol=1e-7)

    def test_header_comments_and_whitespace(self):
        img = load_ppm(b"P5  # comment\n# another\n 2\t3 # w h\n255\n" + bytes(6))
        assert (img.width, img.height) == (2, 3)

    def test_bad_magic_offset(self):
        with pytest.raises(PpmParseError) as err:
            load_ppm(b"P7 1 1 255 \x00")
        assert err.value.offset == 0

    def test_bad_maxval(self):
        with pytest.raises(PpmParseError, match="maxval"):
            load_ppm(b"P5 1 1 65535 " + bytes(2))

    def test_truncated_raster_names_offset(self):
        with pytest.raises(PpmParseError, match="truncated") as err:
            load_ppm(b"P6 2 2 255 " + bytes(5))
        assert err.value.offset == 16  # header is 11 bytes, 5 raster bytes present

    def test_non_numeric_header(self):
        with pytest.raises(PpmParseError):
            load_ppm(b"P5 x 1 255 \x00")

    def test_missing_raster_separator(self):
        with pytest.raises(PpmParseError):
            load_ppm(b"P5 1 1 255")


class TestSavePpm:
    def test_gray_one_pixel_exact_bytes(self):
        img = constant(1.0, 1, 1)
        assert save_ppm(img) == b"P5\n1 1\n255\n\xff"

    def test_quantization_inverse_of_128(self):
        img = constant(np.float32(128 / 255), 1, 1)
        assert save_ppm(img)[-1] == 128

    def test_out_of_range_clamps(self):
        assert save_ppm(constant(1.2, 1, 1))[-1] == 255
        assert save_ppm(constant(-0.3, 1, 1))[-1] == 0

    def test_rejects_ycbcr(self):
        img = rgb_to_ycbcr(constant(0.5, 2, 2, 3))
        with pytest.raises(ContractViolation):
            save_ppm(img)

    def test_header_layout_p6(self):
        img = constant(0.0, 3, 2, 3)
        assert save_ppm(img).startswith(b"P6\n3 2\n255\n")

    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
    @settings(max_examples=40, deadline=None)
    def test_save_load_round_trip(self, seed, w, h):
        rng = np.random.default_rng(seed)
        img = grid_image(rng, w, h, channels=3)
        again = load_ppm(save_ppm(img))
        np.testing.assert_array_equal(img.data, again.data)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_load_save_round_trip_bytes(self, seed):
        rng = np.random.default_rng(seed)
        w, h = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        raster = bytes(rng.integers(0, 256, w * h * 3, dtype=np.uint8))
        blob = f"P6\n{w} {h}\n255\n".encode() + raster
        assert save_ppm(load_ppm(blob)) == blob


class TestColorConversion:
    def test_white_point(self):
        ycc = rgb_to_ycbcr(constant(1.0, 2, 2, 3))
        np.testing.assert_allclose(ycc.data[0], 1.0, atol=1e-7)
        np.testing.assert_allclose(ycc.data[1], 0.5, atol=1e-7)
        np.testing.assert_allclose(ycc.data[2], 0.5, atol=1e-7)

    def test_black_point(self):
        ycc = rgb_to_ycbcr(constant(0.0, 2, 2, 3))
        np.testing.assert_allclose(ycc.data[0], 0.0, atol=1e-7)
        np.testing.assert_allclose(ycc.data[1], 0.5, atol=1e-7)

    def test_gray_axis_identity(self):
        data = np.zeros((3, 1, 3), dtype=np.float32)
        data[0] = [[0.25, 0.5, 0.75]]
        data[1] = 0.5
        data[2] = 0.5
        rgb = ycbcr_to_rgb(Image(data, YCBCR))
        for ch in range(3):
            np.testing.assert_allclose(rgb.data[ch], data[0], atol=1e-6)

    def test_red_point_inverse(self):
        red = np.zeros((3, 1, 1), dtype=np.float32)
        red[0] = 1.0
        back = ycbcr_to_rgb(rgb_to_ycbcr(Image(red, RGB)))
        np.testing.assert_allclose(back.data, red, atol=1e-5)

    def test_round_trip_many_random_images(self, rng):
        worst = 0.0
        for _ in range(1000):
            img = random_image(rng, 4, 4)
            back = ycbcr_to_rgb(rgb_to_ycbcr(img))
            worst = max(worst, float(np.abs(back.data - img.data).max()))
        assert worst <= 1e-5

    def test_wrong_space_raises(self):
        with pytest.raises(ContractViolation):
            rgb_to_ycbcr(constant(0.5, 2, 2))
        with pytest.raises(ContractViolation):
            ycbcr_to_rgb(constant(0.5, 2, 2, 3))


class TestCropToMultiple:
    def test_floor_arithmetic(self):
        img = constant(0.1, 10, 7)
        out = crop_to_multiple(img, 4)
        assert (out.width, out.height) == (8, 4)

    def test_identity_when_divisible(self, rng):
        img = random_image(rng, 8, 8)
        out = crop_to_multiple(img, 4)
        assert out is img

    def test_too_small(self):
        with pytest.raises(ImageTooSmallError):
            crop_to_multiple(constant(0.0, 3, 3), 4)

    def test_idempotent(self, rng):
        img = random_image(rng, 13, 9)
        once = crop_to_multiple(img, 4)
        twice = crop_to_multiple(once, 4)
        np.testing.assert_array_equal(once.data, twice.data)

    def test_keeps_top_left(self, rng):
        img = random_image(rng, 5, 5)
        out = crop_to_multiple(img, 2)
        np.testing.assert_array_equal(out.data, img.data[:, :4, :4])


class TestAbsDiff:
    def test_zero_on_equal(self, rng):
        img = random_image(rng)
        diff = abs_diff(img, img)
        assert not diff.image.data.any()

    def test_constant_case(self):
        diff = abs_diff(constant(0.3, 4, 4), constant(0.7, 4, 4))
        np.testing.assert_allclose(diff.image.data, 0.4, atol=1e-7)

    def test_symmetry(self, rng):
        a, b = random_image(rng), random_image(rng)
        np.testing.assert_array_equal(
            abs_diff(a, b).image.data, abs_diff(b, a).image.data
        )

    def test_non_negative_and_zero_iff_equal(self, rng):
        a, b = random_image(rng), random_image(rng)
        d = abs_diff(a, b).image.data
        assert (d >= 0).all()
        assert d.any()  # random pairs differ somewhere

    def test_shape_mismatch(self, rng):
        with pytest.raises(ContractViolation):
            abs_diff(random_image(rng, 4, 4), random_image(rng, 8, 8))

    def test_records_sources(self, rng):
        img = random_image(rng)
        diff = abs_diff(img, img, "left", "right")
        assert (diff.source_a, diff.source_b) == ("left", "right")
