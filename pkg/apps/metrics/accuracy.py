"""
Accuracy metrics: NME, sequence NRMSE, failure rate and CED AUC.

NME and NRMSE are reported x100; FR and AUC take per-sample NMEs as fractions.
"""

from typing import Sequence

import numpy as np

from apps.errors import MetricDomainError, ShapeMismatchError
from apps.heatmaps.heatmap import check_same_count, validate_landmarks
from .normalization import NormalizationRule

DEFAULT_CUTOFF = 0.10


def landmark_errors(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Euclidean error of every landmark, shape ``(K,)``."""
    pred, truth = validate_landmarks(pred), validate_landmarks(truth)
    check_same_count(pred, truth)
    return np.linalg.norm(pred - truth, axis=1)


def nme(pred: np.ndarray, truth: np.ndarray, rule: NormalizationRule) -> float:
    """
    Normalised mean error of one frame.

    Args:
        pred (np.ndarray): ``(K, 2)`` predicted landmarks.
        truth (np.ndarray): ``(K, 2)`` ground-truth landmarks.
        rule (NormalizationRule): Face-scale normaliser.

    Returns:
        float: ``100 * mean_k ||pred_k - truth_k|| / normaliser``.
    """
    errors = landmark_errors(pred, truth)
    return float(errors.mean() / rule.normalizer(truth) * 100.0)


def nrmse_sequence(preds: Sequence[np.ndarray], truths: Sequence[np.ndarray], rule: NormalizationRule) -> float:
    """
    Normalised root-mean-square error over a sequence of frames.

    Per frame the Euclidean landmark errors are combined as a root mean square
    and normalised; frames are then averaged and the result scaled by 100.

    Raises:
        MetricDomainError: On an empty sequence.
        ShapeMismatchError: If the two sequences differ in length.
    """
    if len(preds) != len(truths):
        raise ShapeMismatchError(f"{len(preds)} predicted frames for {len(truths)} ground-truth frames")
    if len(preds) == 0:
        raise MetricDomainError("NRMSE of an empty sequence is undefined")
    per_frame = [
        np.sqrt(np.mean(landmark_errors(pred, truth) ** 2)) / rule.normalizer(truth)
        for pred, truth in zip(preds, truths)
    ]
    return float(np.mean(per_frame) * 100.0)


def _samples(nme_values: Sequence[float]) -> np.ndarray:
    values = np.asarray(nme_values, dtype=np.float64).ravel()
    if values.size == 0:
        raise MetricDomainError("At least one NME sample is required")
    return values


def fr(nme_values: Sequence[float], cutoff: float = DEFAULT_CUTOFF) -> float:
    """Fraction of samples whose NME exceeds ``cutoff``."""
    return float(np.mean(_samples(nme_values) > cutoff))


def auc_ced(nme_values: Sequence[float], cutoff: float = DEFAULT_CUTOFF) -> float:
    """
    Area under the cumulative error distribution on ``[0, cutoff]``, divided by ``cutoff``.

    The CED is a step function, so each sample contributes exactly
    ``cutoff - nme`` when it lies below the cutoff. Errors are capped at the
    cutoff and scaled before averaging so that all-perfect and all-failed
    sets give exactly 1 and 0.
    """
    values = _samples(nme_values)
    capped = np.minimum(values, cutoff) / cutoff
    return float(np.clip(1.0 - np.mean(capped), 0.0, 1.0))
