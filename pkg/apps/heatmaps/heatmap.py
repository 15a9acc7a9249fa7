"""
Grid and landmark primitives shared by every other component.

A heatmap is a 2-D ``float64`` array ``(H, W)``; a heatmap stack is a
``(K, H, W)`` array holding one channel per landmark; a landmark set is a
``(K, 2)`` array of 0-based sub-pixel ``(x, y)`` = ``(column, row)`` points.
"""

import numpy as np

from apps.errors import LandmarkOutOfBoundsError, ShapeMismatchError

MIN_GRID_SIZE = 3
DEFAULT_HEATMAP_SIGMA = 1.5


def validate_heatmap(values: np.ndarray) -> np.ndarray:
    """
    Check a single heatmap and return it as a float64 array.

    Args:
        values (np.ndarray): Candidate heatmap.

    Returns:
        np.ndarray: The heatmap as float64.

    Raises:
        ShapeMismatchError: If the array is not 2-D or smaller than 3x3.
        ValueError: If it contains NaN or Inf.
    """
    heatmap = np.asarray(values, dtype=np.float64)
    if heatmap.ndim != 2:
        raise ShapeMismatchError(f"Heatmap must be 2-D, got shape {heatmap.shape}")
    if heatmap.shape[0] < MIN_GRID_SIZE or heatmap.shape[1] < MIN_GRID_SIZE:
        raise ShapeMismatchError(f"Heatmap must be at least {MIN_GRID_SIZE}x{MIN_GRID_SIZE}, got {heatmap.shape}")
    if not np.all(np.isfinite(heatmap)):
        raise ValueError("Heatmap contains non-finite values")
    return heatmap


def validate_stack(stack: np.ndarray) -> np.ndarray:
    """
    Check a ``(K, H, W)`` heatmap stack and return it as float64.

    Raises:
        ShapeMismatchError: If the array is not 3-D or its grids are too small.
        ValueError: If it contains NaN or Inf.
    """
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[0] < 1:
        raise ShapeMismatchError(f"Heatmap stack must have shape (K, H, W), got {stack.shape}")
    if stack.shape[1] < MIN_GRID_SIZE or stack.shape[2] < MIN_GRID_SIZE:
        raise ShapeMismatchError(f"Heatmap grids must be at least {MIN_GRID_SIZE}x{MIN_GRID_SIZE}, got {stack.shape[1:]}")
    if not np.all(np.isfinite(stack)):
        raise ValueError("Heatmap stack contains non-finite values")
    return stack


def validate_landmarks(points: np.ndarray) -> np.ndarray:
    """Check a ``(K, 2)`` landmark set and return it as float64."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 1:
        raise ShapeMismatchError(f"Landmark set must have shape (K, 2), got {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ValueError("Landmark set contains non-finite coordinates")
    return points


def check_same_count(*landmark_sets: np.ndarray) -> int:
    """
    Verify that all landmark sets hold the same number of points.

    Returns:
        int: The shared landmark count K.
    """
    counts = {np.shape(points)[0] for points in landmark_sets}
    if len(counts) != 1:
        raise ShapeMismatchError(f"Landmark sets disagree on K: {sorted(counts)}")
    return counts.pop()


def make_gaussian_heatmap(landmarks: np.ndarray, height: int, width: int,
                          sigma: float = DEFAULT_HEATMAP_SIGMA) -> np.ndarray:
    """
    Synthesise one unnormalised Gaussian channel per landmark.

    Channel ``k`` holds ``exp(-((x - x_k)^2 + (y - y_k)^2) / (2 sigma^2))`` at
    every pixel centre, so a landmark sitting on a grid point peaks at 1.0.

    Args:
        landmarks (np.ndarray): ``(K, 2)`` landmark set, 0-based ``(x, y)``.
        height (int): Grid height in pixels.
        width (int): Grid width in pixels.
        sigma (float): Gaussian standard deviation in pixels.

    Returns:
        np.ndarray: ``(K, height, width)`` heatmap stack.

    Raises:
        ValueError: If sigma is not positive or the grid is too small.
        LandmarkOutOfBoundsError: If a landmark lies outside ``[0, width) x [0, height)``.
    """
    if sigma <= 0:
        raise ValueError(f"Heatmap sigma must be positive, got {sigma}")
    if height < MIN_GRID_SIZE or width < MIN_GRID_SIZE:
        raise ShapeMismatchError(f"Grid must be at least {MIN_GRID_SIZE}x{MIN_GRID_SIZE}, got {height}x{width}")
    points = validate_landmarks(landmarks)
    outside = (points[:, 0] < 0) | (points[:, 0] >= width) | (points[:, 1] < 0) | (points[:, 1] >= height)
    if np.any(outside):
        index = int(np.flatnonzero(outside)[0])
        raise LandmarkOutOfBoundsError(
            f"Landmark {index} at {tuple(points[index])} lies outside the {width}x{height} grid"
        )

    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    dx2 = (xs[None, None, :] - points[:, 0, None, None]) ** 2
    dy2 = (ys[None, :, None] - points[:, 1, None, None]) ** 2
    return np.exp(-(dx2 + dy2) / (2.0 * sigma ** 2))
