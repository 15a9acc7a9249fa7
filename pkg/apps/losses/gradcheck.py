"""
Finite-difference verification of analytic loss gradients.
"""

from typing import Callable

import numpy as np

from apps.diagnostics.oracles import oracle_grad
from .base import LossValueGrad


def grad_check(loss_op: Callable[[np.ndarray], LossValueGrad], inputs: np.ndarray,
               epsilon: float = 1e-5) -> float:
    """
    Compare the analytic gradient of ``loss_op`` with central differences.

    Args:
        loss_op (Callable): Maps a prediction array to a LossValueGrad.
        inputs (np.ndarray): Point at which both gradients are evaluated.
        epsilon (float): Finite-difference step in ``[1e-7, 1e-3]``.

    Returns:
        float: ``max |analytic - numeric| / max(1, |numeric|)`` over all pixels.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    analytic = np.asarray(loss_op(inputs).grad, dtype=np.float64)
    numeric = oracle_grad(lambda x: loss_op(x).value, inputs, epsilon)
    discrepancy = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
    return float(discrepancy.max())
