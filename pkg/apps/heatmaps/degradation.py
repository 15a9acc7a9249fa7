"""
Degradation operators applied to heatmaps: additive Gaussian noise and
separable Gaussian blur.

They model the random noise and motion blur that make an image-oriented
detector jitter on video frames.
"""

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.ndimage import correlate1d


class DegradationConfig(BaseModel):
    """Strength of the simulated detector degradations."""

    model_config = ConfigDict(extra="forbid")

    noise_sigma: float = Field(0.0, ge=0.0)
    blur_sigma: float = Field(0.0, ge=0.0)
    peak_jitter_sigma: float = Field(1.0, ge=0.0)
    seed: int = Field(0, ge=0)


def add_gaussian_noise(stack: np.ndarray, noise_sigma: float, seed: int) -> np.ndarray:
    """
    Add i.i.d. ``N(0, noise_sigma^2)`` noise to every pixel and clamp to ``[0, 1]``.

    Args:
        stack (np.ndarray): Heatmap or heatmap stack.
        noise_sigma (float): Noise standard deviation.
        seed (int): Seed of the call-local generator.

    Returns:
        np.ndarray: Noisy copy; an unchanged copy when ``noise_sigma`` is 0.
    """
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be non-negative, got {noise_sigma}")
    stack = np.asarray(stack, dtype=np.float64)
    if noise_sigma == 0:
        return stack.copy()
    rng = np.random.default_rng(seed)
    noisy = stack + rng.normal(0.0, noise_sigma, size=stack.shape)
    return np.clip(noisy, 0.0, 1.0)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian kernel with radius ``ceil(3 sigma)``."""
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-offsets ** 2 / (2.0 * sigma ** 2))
    return kernel / kernel.sum()


def gaussian_blur(stack: np.ndarray, blur_sigma: float) -> np.ndarray:
    """
    Blur each grid with a separable Gaussian, replicating edge pixels.

    Args:
        stack (np.ndarray): Heatmap ``(H, W)`` or stack ``(..., H, W)``.
        blur_sigma (float): Kernel standard deviation in pixels.

    Returns:
        np.ndarray: Blurred copy; an unchanged copy when ``blur_sigma`` is 0.
    """
    if blur_sigma < 0:
        raise ValueError(f"blur_sigma must be non-negative, got {blur_sigma}")
    stack = np.asarray(stack, dtype=np.float64)
    if blur_sigma == 0:
        return stack.copy()
    kernel = gaussian_kernel_1d(blur_sigma)
    # mode='nearest' is clamp-to-edge replication
    blurred = correlate1d(stack, kernel, axis=-1, mode="nearest")
    return correlate1d(blurred, kernel, axis=-2, mode="nearest")
