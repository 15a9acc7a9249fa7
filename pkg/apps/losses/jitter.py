"""
Jitter loss: a pixel loss modulated by the temporal inconsistency of the
decoded landmarks of two adjacent frames.

With ``e_t = u_t - gt_t``, ``e_prev = u_prev - gt_prev`` and the ground-truth
offset ``c = gt_t - gt_prev``, the modulation of landmark ``k`` is

    psi_k = min(||e_t - e_prev|| / (||c|| + xi), theta)

and its channel loss is ``(lambda + psi_k) * L_pixel(s_t[k], gt_heatmap[k])``.
``psi`` is a per-step scalar weight: no gradient flows through the decoder.
"""

from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from apps.errors import ShapeMismatchError
from apps.heatmaps.heatmap import check_same_count, validate_landmarks
from .base import LossValueGrad, PixelLoss
from .pixel_losses import PixelLossKind, make_pixel_loss

DEFAULT_THETA = 1.0
DEFAULT_XI = 1.0
DEFAULT_LAMBDA = 1.0


class LossKind(str, Enum):
    """Fine-tuning objective: a bare pixel loss or the modulated jitter loss."""

    L2 = "l2"
    L1 = "l1"
    SMOOTH_L1 = "smoothl1"
    WING = "wing"
    AWING = "awing"
    GEMAN_MCCLURE = "gm"
    JITTER = "jitter"


class JitterConfig(BaseModel):
    """Hyperparameters of the fine-tuning objective (JSON section ``loss``)."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    kind: LossKind = LossKind.JITTER
    pixel_loss: PixelLossKind = PixelLossKind.GEMAN_MCCLURE
    theta: float = Field(DEFAULT_THETA, gt=0.0)
    xi: float = Field(DEFAULT_XI, gt=0.0)
    lam: float = Field(DEFAULT_LAMBDA, ge=0.0, alias="lambda")

    @property
    def modulated(self) -> bool:
        return self.kind is LossKind.JITTER

    @property
    def active_pixel_loss(self) -> PixelLossKind:
        """Pixel loss actually evaluated: the inner loss for jitter, else ``kind`` itself."""
        if self.modulated:
            return self.pixel_loss
        return PixelLossKind(self.kind.value)

    def make_pixel_loss(self) -> PixelLoss:
        return make_pixel_loss(self.active_pixel_loss, self.theta)


def _error_terms(u_t, gt_t, u_prev, gt_prev) -> Tuple[np.ndarray, np.ndarray]:
    """Per-landmark ``||e_t - e_prev||`` and ``||c||``."""
    u_t, gt_t, u_prev, gt_prev = (validate_landmarks(p) for p in (u_t, gt_t, u_prev, gt_prev))
    check_same_count(u_t, gt_t, u_prev, gt_prev)
    inconsistency = np.linalg.norm((u_t - gt_t) - (u_prev - gt_prev), axis=1)
    offset = np.linalg.norm(gt_t - gt_prev, axis=1)
    return inconsistency, offset


def jitter_modulation(u_t: np.ndarray, gt_t: np.ndarray, u_prev: np.ndarray, gt_prev: np.ndarray,
                      config: JitterConfig) -> np.ndarray:
    """
    Modulation term psi for every landmark, clamped to ``[0, theta]``.

    Args:
        u_t (np.ndarray): Predicted landmarks of frame t.
        gt_t (np.ndarray): Ground-truth landmarks of frame t.
        u_prev (np.ndarray): Predicted landmarks of frame t-1.
        gt_prev (np.ndarray): Ground-truth landmarks of frame t-1.
        config (JitterConfig): Supplies theta and xi.

    Returns:
        np.ndarray: ``(K,)`` modulation weights.
    """
    inconsistency, offset = _error_terms(u_t, gt_t, u_prev, gt_prev)
    return np.minimum(inconsistency / (offset + config.xi), config.theta)


def jitter_criterion(u_t: np.ndarray, gt_t: np.ndarray, u_prev: np.ndarray, gt_prev: np.ndarray,
                     theta: float) -> np.ndarray:
    """True for landmarks whose inconsistency exceeds ``theta * ||c||``."""
    inconsistency, offset = _error_terms(u_t, gt_t, u_prev, gt_prev)
    return inconsistency > theta * offset


def pixel_loss(pred: np.ndarray, truth: np.ndarray, config: JitterConfig) -> LossValueGrad:
    """Bare pixel loss selected by ``config`` on one heatmap or a whole stack."""
    return config.make_pixel_loss()(pred, truth)


def weighted_stack_loss(pred: np.ndarray, truth: np.ndarray, weights: np.ndarray,
                        pixel_loss: PixelLoss) -> LossValueGrad:
    """
    Mean over channels of ``weights[k] * pixel_loss(pred[k], truth[k])``.

    Returns:
        LossValueGrad: value and ``(K, H, W)`` gradient with respect to ``pred``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if pred.ndim != 3 or pred.shape != truth.shape:
        raise ShapeMismatchError(f"Prediction stack {pred.shape} and truth stack {truth.shape} must match as (K, H, W)")
    n_channels = pred.shape[0]
    if weights.shape != (n_channels,):
        raise ShapeMismatchError(f"Expected {n_channels} channel weights, got shape {weights.shape}")

    value = 0.0
    grad = np.empty_like(pred)
    for k in range(n_channels):
        channel = pixel_loss(pred[k], truth[k])
        value += weights[k] * channel.value
        grad[k] = weights[k] * channel.grad / n_channels
    return LossValueGrad(value=float(value / n_channels), grad=grad)


def jitter_loss(pred: np.ndarray, truth: np.ndarray, u_t: np.ndarray, gt_t: np.ndarray,
                u_prev: np.ndarray, gt_prev: np.ndarray, config: JitterConfig) -> LossValueGrad:
    """
    Loss of one frame given the decoded landmarks of this and the previous frame.

    Unmodulated kinds (plain pixel losses) use ``psi = 0``.

    Args:
        pred (np.ndarray): Stabilised heatmaps ``s_t`` of shape ``(K, H, W)``.
        truth (np.ndarray): Ground-truth heatmaps of the same shape.
        u_t, gt_t, u_prev, gt_prev (np.ndarray): ``(K, 2)`` landmark sets.
        config (JitterConfig): Objective hyperparameters.

    Returns:
        LossValueGrad: Mean channel loss and its gradient with respect to ``pred``.
    """
    n_channels = np.shape(pred)[0]
    if check_same_count(u_t, gt_t, u_prev, gt_prev) != n_channels:
        raise ShapeMismatchError(f"Landmark sets hold {np.shape(u_t)[0]} points for {n_channels} heatmap channels")
    if config.modulated:
        psi = jitter_modulation(u_t, gt_t, u_prev, gt_prev, config)
    else:
        psi = np.zeros(n_channels)
    return weighted_stack_loss(pred, truth, config.lam + psi, config.make_pixel_loss())


def first_frame_loss(pred: np.ndarray, truth: np.ndarray, config: JitterConfig) -> LossValueGrad:
    """The lambda-weighted pixel loss used for the frame without a predecessor."""
    weights = np.full(np.shape(pred)[0], config.lam)
    return weighted_stack_loss(pred, truth, weights, config.make_pixel_loss())


def decomposed_jitter_loss(e_t: np.ndarray, e_prev: np.ndarray, config: JitterConfig,
                           pixel_loss: Optional[PixelLoss] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Two-term view of the jitter loss over scalar errors of adjacent frames.

    The first term is ``lambda * (L(e_t) + L(e_prev))``; the second scales the
    same sum by ``|e_t - e_prev|``.

    Returns:
        Tuple[np.ndarray, np.ndarray]: pixel term and modulated term, elementwise.
    """
    pixel_loss = pixel_loss or config.make_pixel_loss()
    e_t = np.asarray(e_t, dtype=np.float64)
    e_prev = np.asarray(e_prev, dtype=np.float64)
    zeros = np.zeros_like(e_t)
    both = pixel_loss.elementwise(e_t, zeros)[0] + pixel_loss.elementwise(e_prev, zeros)[0]
    return config.lam * both, np.abs(e_t - e_prev) * both
