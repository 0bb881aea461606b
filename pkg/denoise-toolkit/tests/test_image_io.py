import numpy as np
import pytest
from PIL import Image

from core.errors import ClippingWarning, FormatError, ImageFormatError, ShapeError
from data.image_io import as_image, image_shape, list_images, load_image, save_image


class TestRawImages:

    def test_round_trip_is_bit_identical(self, tmp_path, rng):
        image = rng.normal(100, 30, size=(17, 23)).astype(np.float32)
        save_image(image, tmp_path / "a.raw")
        np.testing.assert_array_equal(load_image(tmp_path / "a.raw"), image)

    def test_truncated_raw(self, tmp_path):
        path = tmp_path / "a.raw"
        save_image(np.ones((4, 4)), path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError):
            load_image(path)


class TestPngImages:

    def test_sixteen_bit_value_kept(self, tmp_path):
        data = np.full((5, 6), 1000, dtype=np.uint16)
        Image.fromarray(data).save(tmp_path / "a.png")
        image = load_image(tmp_path / "a.png")
        assert image.dtype == np.float32
        np.testing.assert_array_equal(image, 1000.0)

    def test_rgb_rejected(self, tmp_path):
        Image.new("RGB", (4, 4)).save(tmp_path / "rgb.png")
        with pytest.raises(ImageFormatError, match="single-channel only"):
            load_image(tmp_path / "rgb.png")

    def test_clipping_warns(self, tmp_path):
        image = np.array([[-5.0, 10.4], [300.0, 70000.0]])
        with pytest.warns(ClippingWarning):
            clipped = save_image(image, tmp_path / "c.png")
        assert clipped
        np.testing.assert_array_equal(load_image(tmp_path / "c.png"), [[0, 10], [300, 65535]])

    def test_in_range_values_round(self, tmp_path):
        assert save_image(np.array([[1.4, 2.6]]), tmp_path / "r.png") is False
        np.testing.assert_array_equal(load_image(tmp_path / "r.png"), [[1, 3]])

    def test_unknown_suffix(self, tmp_path):
        with pytest.raises(ImageFormatError):
            save_image(np.ones((2, 2)), tmp_path / "a.tif")


class TestImageArray:

    @pytest.mark.parametrize("bad", [np.ones(4), np.ones((2, 2, 2)), np.zeros((0, 3))])
    def test_shape_rejected(self, bad):
        with pytest.raises(ShapeError):
            as_image(bad)

    def test_non_finite_rejected(self):
        with pytest.raises(ShapeError):
            as_image(np.array([[1.0, np.nan]]))

    def test_list_images_sorted_and_filtered(self, tmp_path):
        for name in ("b.raw", "a.png", "notes.txt"):
            (tmp_path / name).write_bytes(b"")
        assert [p.name for p in list_images(tmp_path)] == ["a.png", "b.raw"]


class TestImageShape:

    def test_raw_and_png_headers(self, tmp_path):
        save_image(np.zeros((7, 3)), tmp_path / "a.raw")
        Image.fromarray(np.zeros((5, 9), dtype=np.uint8)).save(tmp_path / "b.png")
        assert image_shape(tmp_path / "a.raw") == (7, 3)
        assert image_shape(tmp_path / "b.png") == (5, 9)

    def test_unsupported_suffix(self, tmp_path):
        with pytest.raises(ImageFormatError):
            image_shape(tmp_path / "a.tif")
