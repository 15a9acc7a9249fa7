"""
Unit tests for heatmap synthesis and validation.
"""

import numpy as np
import pytest

from apps.errors import LandmarkOutOfBoundsError, ShapeMismatchError
from apps.heatmaps.heatmap import (
    check_same_count, make_gaussian_heatmap, validate_heatmap, validate_landmarks, validate_stack,
)


class TestMakeGaussianHeatmap:
    """Tests for make_gaussian_heatmap."""

    def test_peak_on_grid_point(self):
        stack = make_gaussian_heatmap(np.array([[5.0, 7.0]]), 16, 16, sigma=1.5)
        assert stack.shape == (1, 16, 16)
        assert stack[0, 7, 5] == 1.0
        assert np.unravel_index(np.argmax(stack[0]), (16, 16)) == (7, 5)

    def test_value_one_pixel_away(self):
        stack = make_gaussian_heatmap(np.array([[5.0, 5.0]]), 11, 11, sigma=1.5)
        assert stack[0, 5, 6] == pytest.approx(np.exp(-1.0 / 4.5), abs=1e-12)

    def test_channels_follow_landmark_order(self):
        points = np.array([[2.0, 3.0], [8.0, 1.0], [4.0, 9.0]])
        stack = make_gaussian_heatmap(points, 12, 12)
        for k, (x, y) in enumerate(points):
            assert stack[k, int(y), int(x)] == 1.0

    def test_symmetric_around_integer_landmark(self):
        stack = make_gaussian_heatmap(np.array([[6.0, 6.0]]), 13, 13)
        assert np.array_equal(stack[0], stack[0, ::-1, ::-1])

    @pytest.mark.parametrize("point", [[-0.1, 3.0], [3.0, -1.0], [16.0, 3.0], [3.0, 16.0]])
    def test_out_of_bounds_landmark(self, point):
        with pytest.raises(LandmarkOutOfBoundsError):
            make_gaussian_heatmap(np.array([point]), 16, 16)

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_invalid_sigma(self, sigma):
        with pytest.raises(ValueError):
            make_gaussian_heatmap(np.array([[3.0, 3.0]]), 8, 8, sigma=sigma)


class TestValidation:
    """Tests for the shape validators."""

    def test_heatmap_too_small(self):
        with pytest.raises(ShapeMismatchError):
            validate_heatmap(np.zeros((2, 5)))

    def test_heatmap_not_finite(self):
        heatmap = np.zeros((4, 4))
        heatmap[1, 1] = np.nan
        with pytest.raises(ValueError):
            validate_heatmap(heatmap)

    def test_stack_must_be_3d(self):
        with pytest.raises(ShapeMismatchError):
            validate_stack(np.zeros((4, 4)))

    def test_landmarks_shape(self):
        with pytest.raises(ShapeMismatchError):
            validate_landmarks(np.zeros((3, 3)))

    def test_check_same_count(self):
        assert check_same_count(np.zeros((4, 2)), np.ones((4, 2))) == 4
        with pytest.raises(ShapeMismatchError):
            check_same_count(np.zeros((4, 2)), np.zeros((5, 2)))
