"""
Base class for pixel losses between a predicted and a ground-truth heatmap.

Subclasses only define the per-pixel penalty and its derivative with respect
to the residual ``d = pred - truth``; reduction by the mean over pixels and
shape checking live here.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from apps.errors import ShapeMismatchError


@dataclass(frozen=True)
class LossValueGrad:
    """Scalar loss value and its gradient with respect to the prediction."""

    value: float
    grad: np.ndarray


class PixelLoss:
    """Mean-reduced pixel loss with an analytic gradient."""

    name = "base"

    def elementwise(self, residual: np.ndarray, truth: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Per-pixel penalty and derivative.

        Args:
            residual (np.ndarray): ``pred - truth``.
            truth (np.ndarray): Ground-truth values (only some losses use them).

        Returns:
            Tuple[np.ndarray, np.ndarray]: penalty and d(penalty)/d(residual).
        """
        raise NotImplementedError("Pixel losses must implement elementwise().")

    def __call__(self, pred: np.ndarray, truth: np.ndarray) -> LossValueGrad:
        pred = np.asarray(pred, dtype=np.float64)
        truth = np.asarray(truth, dtype=np.float64)
        if pred.shape != truth.shape:
            raise ShapeMismatchError(f"{self.name} loss: prediction shape {pred.shape} != truth shape {truth.shape}")
        values, grads = self.elementwise(pred - truth, truth)
        n_pixels = values.size
        return LossValueGrad(value=float(values.sum() / n_pixels), grad=grads / n_pixels)
