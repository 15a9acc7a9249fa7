"""
Unit tests for the argmax, interpolation and PDC decoders.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from apps.errors import DegenerateHeatmapError
from apps.heatmaps.heatmap import make_gaussian_heatmap
from apps.postprocessing.argmax_decoder import ArgmaxDecoder
from apps.postprocessing.base import HeatmapDecoder
from apps.postprocessing.interp_decoder import InterpolationDecoder
from apps.postprocessing.pdc_decoder import PDCConfig, PDCDecoder


def delta(height, width, row, col, value=1.0):
    heatmap = np.zeros((height, width))
    heatmap[row, col] = value
    return heatmap


class TestHeatmapDecoderBase:
    """Tests for the decoder interface."""

    def test_decode_not_implemented(self):
        with pytest.raises(NotImplementedError):
            HeatmapDecoder().decode(np.zeros((3, 3)))


class TestArgmaxDecoder:
    """Tests for ArgmaxDecoder."""

    def test_delta(self):
        assert ArgmaxDecoder().decode(delta(3, 3, 1, 2)) == (2.0, 1.0)

    def test_all_zero_map(self):
        assert ArgmaxDecoder().decode(np.zeros((3, 3))) == (0.0, 0.0)

    def test_tie_goes_to_smallest_row(self):
        heatmap = np.zeros((3, 3))
        heatmap[0, 2] = 1.0
        heatmap[2, 0] = 1.0
        assert ArgmaxDecoder().decode(heatmap) == (2.0, 0.0)


class TestInterpolationDecoder:
    """Tests for InterpolationDecoder."""

    def test_equal_neighbours_no_shift(self):
        assert InterpolationDecoder().decode(delta(5, 5, 2, 2)) == (2.0, 2.0)

    def test_quarter_shift_towards_larger_neighbour(self):
        heatmap = np.zeros((5, 5))
        heatmap[2, 1:4] = [0.4, 1.0, 0.6]
        x, y = InterpolationDecoder().decode(heatmap)
        assert x == 2.25
        assert y == 2.0

    def test_negative_shift_on_rows(self):
        heatmap = np.zeros((5, 5))
        heatmap[1:4, 2] = [0.7, 1.0, 0.2]
        assert InterpolationDecoder().decode(heatmap) == (2.0, 1.75)

    def test_border_peak_not_shifted(self):
        heatmap = np.zeros((5, 5))
        heatmap[2, 0] = 1.0
        heatmap[2, 1] = 0.5
        assert InterpolationDecoder().decode(heatmap) == (0.0, 2.0)


class TestPDCDecoder:
    """Tests for PDCDecoder."""

    def test_delta(self):
        assert PDCDecoder(PDCConfig(threshold=0.0)).decode(delta(3, 3, 1, 2)) == (2.0, 1.0)

    def test_weighted_centroid_by_hand(self):
        heatmap = np.zeros((5, 5))
        heatmap[2, 0] = 1.0
        heatmap[2, 4] = 3.0
        assert PDCDecoder(PDCConfig(threshold=0.0)).decode(heatmap) == (3.0, 2.0)

    def test_threshold_removes_background(self):
        heatmap = np.full((5, 5), 0.05)
        heatmap[2, 2] = 1.05
        assert PDCDecoder(PDCConfig(threshold=0.2)).decode(heatmap) == (2.0, 2.0)

    def test_degenerate_heatmap(self):
        with pytest.raises(DegenerateHeatmapError):
            PDCDecoder(PDCConfig(threshold=0.5)).decode(np.full((4, 4), 0.1))

    def test_uniform_map_decodes_to_centre(self):
        x, y = PDCDecoder(PDCConfig(threshold=0.0)).decode(np.ones((5, 7)))
        assert x == pytest.approx(3.0, abs=1e-12)
        assert y == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("threshold", [-0.1, 1.0])
    def test_threshold_range(self, threshold):
        with pytest.raises(ValidationError):
            PDCConfig(threshold=threshold)

    def test_default_threshold(self):
        assert PDCDecoder().threshold == 0.2

    def test_threshold_does_not_hurt_on_background(self):
        heatmap = make_gaussian_heatmap(np.array([[5.0, 6.0]]), 15, 15)[0] + 0.1
        truth = np.array([5.0, 6.0])
        error_plain = np.linalg.norm(np.array(PDCDecoder(PDCConfig(threshold=0.0)).decode(heatmap)) - truth)
        error_thresholded = np.linalg.norm(np.array(PDCDecoder(PDCConfig(threshold=0.2)).decode(heatmap)) - truth)
        assert error_thresholded <= error_plain
        assert error_thresholded == pytest.approx(0.0, abs=1e-9)

    def test_threshold_is_absolute(self):
        heatmap = np.zeros((3, 5))
        heatmap[1, 1] = 1.0
        heatmap[1, 3] = 0.3
        decoder = PDCDecoder(PDCConfig(threshold=0.2))
        x, _ = decoder.decode(heatmap)
        assert x == pytest.approx((1.0 + 0.9) / 1.3, abs=1e-12)
        assert decoder.decode(0.5 * heatmap) == (1.0, 1.0)
        with pytest.raises(DegenerateHeatmapError):
            decoder.decode(0.15 * heatmap)


class TestDecoderProperties:
    """Translation equivariance and determinism of every decoder."""

    @pytest.mark.parametrize("decoder", [ArgmaxDecoder(), InterpolationDecoder(), PDCDecoder()])
    def test_integer_translation(self, decoder):
        base = make_gaussian_heatmap(np.array([[6.0, 7.0]]), 20, 20)[0]
        shifted = np.zeros_like(base)
        shifted[2:, 3:] = base[:-2, :-3]
        x0, y0 = decoder.decode(base)
        x1, y1 = decoder.decode(shifted)
        assert x1 - x0 == pytest.approx(3.0, abs=1e-6)
        assert y1 - y0 == pytest.approx(2.0, abs=1e-6)

    @pytest.mark.parametrize("decoder", [ArgmaxDecoder(), InterpolationDecoder(), PDCDecoder()])
    def test_deterministic(self, decoder):
        heatmap = np.random.default_rng(2).random((9, 9))
        assert decoder.decode(heatmap) == decoder.decode(heatmap)

    def test_pdc_round_trip_on_grid_points(self):
        points = np.array([[8.0, 9.0], [12.0, 7.0]])
        stack = make_gaussian_heatmap(points, 20, 20)
        for k, point in enumerate(points):
            assert np.allclose(PDCDecoder().decode(stack[k]), point, atol=1e-2)

    def test_pdc_round_trip_off_grid(self):
        points = np.array([[10.3, 12.7], [7.25, 20.6], [24.4, 8.8]])
        stack = make_gaussian_heatmap(points, 32, 32)
        decoder = PDCDecoder(PDCConfig(threshold=0.0))
        for k, point in enumerate(points):
            assert np.allclose(decoder.decode(stack[k]), point, atol=1e-3)
