"""
Pixel losses used for heatmap regression: L2, L1, smooth L1, Wing,
Adaptive Wing and Geman-McClure.

Wing and Adaptive Wing keep the defaults published with them
(w=10, eps=2 and w=14, eps=1, alpha=2.1, theta=0.5).
"""

import math
from enum import Enum

import numpy as np

from .base import LossValueGrad, PixelLoss


class PixelLossKind(str, Enum):
    L2 = "l2"
    L1 = "l1"
    SMOOTH_L1 = "smoothl1"
    WING = "wing"
    AWING = "awing"
    GEMAN_MCCLURE = "gm"


class L2Loss(PixelLoss):
    name = "l2"

    def elementwise(self, residual, truth):
        return residual ** 2, 2.0 * residual


class L1Loss(PixelLoss):
    name = "l1"

    def elementwise(self, residual, truth):
        return np.abs(residual), np.sign(residual)


class SmoothL1Loss(PixelLoss):
    """Huber-style L1 with its knee at ``|d| = beta``."""

    name = "smoothl1"

    def __init__(self, beta: float = 1.0):
        self.beta = beta

    def elementwise(self, residual, truth):
        abs_d = np.abs(residual)
        inside = abs_d < self.beta
        values = np.where(inside, 0.5 * residual ** 2 / self.beta, abs_d - 0.5 * self.beta)
        grads = np.where(inside, residual / self.beta, np.sign(residual))
        return values, grads


class WingLoss(PixelLoss):
    name = "wing"

    def __init__(self, omega: float = 10.0, epsilon: float = 2.0):
        self.omega = omega
        self.epsilon = epsilon
        self.c = omega - omega * math.log(1.0 + omega / epsilon)

    def elementwise(self, residual, truth):
        abs_d = np.abs(residual)
        inside = abs_d < self.omega
        values = np.where(inside, self.omega * np.log1p(abs_d / self.epsilon), abs_d - self.c)
        grads = np.where(inside, self.omega / (self.epsilon + abs_d), 1.0) * np.sign(residual)
        return values, grads


class AdaptiveWingLoss(PixelLoss):
    """
    Adaptive Wing loss; the exponent ``alpha - y`` adapts to the target value,
    so the curvature differs between foreground and background pixels.
    """

    name = "awing"

    def __init__(self, omega: float = 14.0, epsilon: float = 1.0, alpha: float = 2.1, theta: float = 0.5):
        self.omega = omega
        self.epsilon = epsilon
        self.alpha = alpha
        self.theta = theta

    def elementwise(self, residual, truth):
        omega, eps, theta = self.omega, self.epsilon, self.theta
        power = self.alpha - truth
        abs_d = np.abs(residual)
        ratio_theta = (theta / eps) ** power
        slope = omega / (1.0 + ratio_theta) * power * (theta / eps) ** (power - 1.0) / eps
        offset = theta * slope - omega * np.log1p(ratio_theta)

        inside = abs_d < theta
        # clipping keeps the unused branch free of 0 ** negative
        safe_d = np.where(inside, abs_d, theta)
        ratio = (safe_d / eps) ** power
        inner_values = omega * np.log1p(ratio)
        inner_grads = omega * power * (safe_d / eps) ** (power - 1.0) / (eps * (1.0 + ratio))

        values = np.where(inside, inner_values, slope * abs_d - offset)
        grads = np.where(inside, inner_grads, slope) * np.sign(residual)
        return values, grads


class GemanMcClureLoss(PixelLoss):
    """``d^2 / (d^2 + theta^2)``, saturating at 1 for outliers."""

    name = "gm"

    def __init__(self, theta: float = 1.0):
        if theta <= 0:
            raise ValueError(f"Geman-McClure theta must be positive, got {theta}")
        self.theta = theta

    def elementwise(self, residual, truth):
        d2 = residual ** 2
        t2 = self.theta ** 2
        denom = d2 + t2
        return d2 / denom, 2.0 * residual * t2 / denom ** 2


def gm_pixel_loss(pred: np.ndarray, truth: np.ndarray, theta: float) -> LossValueGrad:
    """Mean Geman-McClure loss parameterised by the jitter threshold."""
    return GemanMcClureLoss(theta)(pred, truth)


def make_pixel_loss(kind: PixelLossKind, theta: float = 1.0) -> PixelLoss:
    """Instantiate a pixel loss; ``theta`` only parameterises Geman-McClure."""
    kind = PixelLossKind(kind)
    if kind is PixelLossKind.L2:
        return L2Loss()
    if kind is PixelLossKind.L1:
        return L1Loss()
    if kind is PixelLossKind.SMOOTH_L1:
        return SmoothL1Loss()
    if kind is PixelLossKind.WING:
        return WingLoss()
    if kind is PixelLossKind.AWING:
        return AdaptiveWingLoss()
    return GemanMcClureLoss(theta)
