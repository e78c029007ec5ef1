"""Color ramp, overlay arithmetic, and byte-exact P6 output."""

import numpy as np
import pytest

from saliency3d import viz_render as vz
from saliency3d.errors import DimensionError, FormatError


def _px(value: float):
    return tuple(vz.colorize(np.array([[value]], dtype=np.float32)).pixels[0, 0])


class TestColorize:
    def test_stop_values(self):
        assert _px(0.0) == (0, 0, 255)
        assert _px(0.25) == (0, 255, 255)
        assert _px(0.5) == (0, 255, 0)
        assert _px(0.75) == (255, 255, 0)
        assert _px(1.0) == (255, 0, 0)

    def test_half_up_rounding_between_stops(self):
        assert _px(0.125) == (0, 128, 255)

    def test_clamps_outside_unit_interval(self):
        assert _px(-0.5) == (0, 0, 255)
        assert _px(1.7) == (255, 0, 0)

    def test_warmth_is_monotone(self):
        # increasing saliency never moves to a cooler stop segment
        values = np.linspace(0, 1, 101, dtype=np.float32)
        seg = np.clip(np.searchsorted(vz._STOPS, values, side="right") - 1, 0, 3)
        assert np.all(np.diff(seg) >= 0)
        # red channel never decreases, blue never increases along the ramp
        img = vz.colorize(values[None, :]).pixels[0].astype(int)
        assert np.all(np.diff(img[:, 0]) >= 0)
        assert np.all(np.diff(img[:, 2]) <= 0)

    def test_rejects_wrong_rank(self):
        with pytest.raises(DimensionError):
            vz.colorize(np.zeros((2, 2, 2), dtype=np.float32))


class TestOverlay:
    def _pair(self):
        rng = np.random.default_rng(0)
        f = vz.RgbImage(rng.integers(0, 256, (5, 7, 3)).astype(np.uint8))
        h = vz.RgbImage(rng.integers(0, 256, (5, 7, 3)).astype(np.uint8))
        return f, h

    def test_alpha_zero_is_frame(self):
        f, h = self._pair()
        np.testing.assert_array_equal(vz.overlay(f, h, 0.0).pixels, f.pixels)

    def test_alpha_one_is_heat(self):
        f, h = self._pair()
        np.testing.assert_array_equal(vz.overlay(f, h, 1.0).pixels, h.pixels)

    def test_midpoint_arithmetic(self):
        f = vz.RgbImage(np.full((1, 1, 3), 100, np.uint8))
        h = vz.RgbImage(np.full((1, 1, 3), 200, np.uint8))
        assert tuple(vz.overlay(f, h, 0.5).pixels[0, 0]) == (150, 150, 150)

    def test_swap_symmetry_up_to_rounding(self):
        f, h = self._pair()
        a = vz.overlay(f, h, 0.3).pixels.astype(int)
        b = vz.overlay(h, f, 0.7).pixels.astype(int)
        assert np.abs(a - b).max() <= 1

    def test_dim_mismatch(self):
        f = vz.RgbImage(np.zeros((2, 2, 3), np.uint8))
        h = vz.RgbImage(np.zeros((2, 3, 3), np.uint8))
        with pytest.raises(DimensionError):
            vz.overlay(f, h)

    def test_alpha_domain(self):
        f, h = self._pair()
        with pytest.raises(ValueError):
            vz.overlay(f, h, 1.5)


class TestPpm:
    def test_exact_bytes_single_red_pixel(self, tmp_path):
        img = vz.RgbImage(np.array([[[255, 0, 0]]], dtype=np.uint8))
        path = tmp_path / "red.ppm"
        vz.write_ppm(img, path)
        assert path.read_bytes() == b"P6\n1 1\n255\n" + bytes([255, 0, 0])

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        img = vz.RgbImage(rng.integers(0, 256, (4, 6, 3)).astype(np.uint8))
        path = tmp_path / "rt.ppm"
        vz.write_ppm(img, path)
        back = vz.read_ppm(path)
        np.testing.assert_array_equal(back.pixels, img.pixels)

    def test_byte_identical_across_runs(self, tmp_path):
        frame = np.linspace(0, 1, 24, dtype=np.float32).reshape(4, 6)
        p1, p2 = tmp_path / "a.ppm", tmp_path / "b.ppm"
        vz.write_ppm(vz.colorize(frame), p1)
        vz.write_ppm(vz.colorize(frame.copy()), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_zero_dim_rejected_upstream(self):
        with pytest.raises(DimensionError):
            vz.RgbImage(np.zeros((0, 3, 3), dtype=np.uint8))

    def test_read_rejects_non_p6(self, tmp_path):
        path = tmp_path / "bad.ppm"
        path.write_bytes(b"P3\n1 1\n255\n1 2 3\n")
        with pytest.raises(FormatError):
            vz.read_ppm(path)

    def test_read_rejects_truncated(self, tmp_path):
        path = tmp_path / "short.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + bytes(5))
        with pytest.raises(FormatError):
            vz.read_ppm(path)


class TestGrayFrame:
    def test_values_map_to_gray_levels(self):
        img = vz.gray_frame(np.array([[0.0, 0.5, 1.0]], dtype=np.float32))
        assert tuple(img.pixels[0, 0]) == (0, 0, 0)
        assert tuple(img.pixels[0, 1]) == (128, 128, 128)
        assert tuple(img.pixels[0, 2]) == (255, 255, 255)
