"""
Slow reference implementations used to verify the fast paths.

The oracles restate each computation with explicit loops and no shared
helpers, so an agreement between oracle and fast path is meaningful. They
ship with the library so substituted decoders or backbones can be checked
the same way.
"""

import logging
import math
from typing import Callable, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from apps.errors import DegenerateHeatmapError
from apps.metrics.normalization import NormalizationRule
from apps.metrics.report import MetricsReport

logger = logging.getLogger(__name__)

MIN_EPSILON = 1e-7
MAX_EPSILON = 1e-3


class OracleReport(BaseModel):
    """Worst discrepancy observed between a fast path and its oracle."""

    model_config = ConfigDict(extra="forbid")

    max_abs_discrepancy: float = Field(ge=0.0)
    max_rel_discrepancy: float = Field(ge=0.0)
    n_cases: int = Field(ge=1)
    worst_case_seed: int = Field(ge=0)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def oracle_centroid(heatmap: np.ndarray, threshold: float) -> Tuple[float, float]:
    """
    Thresholded mass centroid computed pixel by pixel, 0-based.

    Raises:
        DegenerateHeatmapError: If no mass survives the threshold.
    """
    heatmap = np.asarray(heatmap, dtype=np.float64)
    height, width = heatmap.shape
    mass = 0.0
    moment_x = 0.0
    moment_y = 0.0
    for row in range(height):
        for col in range(width):
            value = heatmap[row, col]
            if value < threshold:
                continue
            mass += value
            moment_x += value * col
            moment_y += value * row
    if not mass > 0:
        raise DegenerateHeatmapError(f"Oracle centroid: no mass above threshold {threshold}")
    return moment_x / mass, moment_y / mass


def oracle_grad(func: Callable[[np.ndarray], float], point: np.ndarray, epsilon: float = 1e-5) -> np.ndarray:
    """
    Central-difference gradient of a scalar function, component by component.

    Args:
        func (Callable): Scalar function of an array.
        point (np.ndarray): Evaluation point (any shape).
        epsilon (float): Step size in ``[1e-7, 1e-3]``.

    Returns:
        np.ndarray: Gradient with the shape of ``point``.
    """
    if not MIN_EPSILON <= epsilon <= MAX_EPSILON:
        raise ValueError(f"epsilon must lie in [{MIN_EPSILON}, {MAX_EPSILON}], got {epsilon}")
    x0 = np.array(point, dtype=np.float64)
    flat = x0.reshape(-1)
    grad = np.zeros(flat.size)
    for j in range(flat.size):
        original = flat[j]
        flat[j] = original + epsilon
        f_plus = func(x0)
        flat[j] = original - epsilon
        f_minus = func(x0)
        flat[j] = original
        grad[j] = (f_plus - f_minus) / (2.0 * epsilon)
    return grad.reshape(x0.shape)


def _oracle_cvar(values):
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return math.sqrt(var) / mean


def _oracle_avar(values):
    total = 0.0
    for t in range(len(values) - 1):
        total += (values[t + 1] - values[t]) ** 2
    return total / (2.0 * (len(values) - 1))


def oracle_metrics(predictions: Sequence[np.ndarray], truths: Sequence[np.ndarray], rule: NormalizationRule,
                   coordinate_offset: float = 0.0, cutoff: float = 0.10) -> MetricsReport:
    """
    NME, NRMSE, FR, AUC, MCV and MAV by direct loops over videos, frames,
    landmarks and axes. Per-landmark breakdowns are left empty.
    """
    frame_nmes = []
    frame_rmses = []
    landmark_nmes = []
    video_cvars = []
    video_avars = []
    for pred_video, truth_video in zip(predictions, truths):
        n_frames, n_landmarks, n_axes = np.shape(pred_video)
        for t in range(n_frames):
            norm = rule.normalizer(truth_video[t])
            squared = 0.0
            nme_sum = 0.0
            for k in range(n_landmarks):
                dx = pred_video[t][k][0] - truth_video[t][k][0]
                dy = pred_video[t][k][1] - truth_video[t][k][1]
                error = math.sqrt(dx * dx + dy * dy)
                squared += error * error
                nme_sum += error / norm
                landmark_nmes.append(error / norm)
            frame_rmses.append(math.sqrt(squared / n_landmarks) / norm)
            frame_nmes.append(nme_sum / n_landmarks)
        cvars = []
        avars = []
        for k in range(n_landmarks):
            for axis in range(n_axes):
                series = [pred_video[t][k][axis] + coordinate_offset for t in range(n_frames)]
                cvars.append(_oracle_cvar(series))
                avars.append(_oracle_avar(series))
        video_cvars.append(sum(cvars) / len(cvars))
        video_avars.append(sum(avars) / len(avars))

    failures = sum(1 for value in frame_nmes if value > cutoff)
    area = sum(cutoff - value if value < cutoff else 0.0 for value in frame_nmes)
    return MetricsReport(
        nme=sum(landmark_nmes) / len(landmark_nmes) * 100.0,
        nrmse=sum(frame_rmses) / len(frame_rmses) * 100.0,
        fr=failures / len(frame_nmes),
        auc=area / len(frame_nmes) / cutoff,
        mcv=sum(video_cvars) / len(video_cvars),
        mav=sum(video_avars) / len(video_avars),
        n_sequences=len(video_cvars),
        n_frames=len(frame_nmes),
    )


def random_single_mode_heatmap(rng: np.random.Generator, height: int, width: int,
                               sigma: float = 1.5, background: float = 0.1) -> np.ndarray:
    """Gaussian blob at a random sub-pixel interior point over a random background."""
    x0 = rng.uniform(3 * sigma, width - 1 - 3 * sigma)
    y0 = rng.uniform(3 * sigma, height - 1 - 3 * sigma)
    ys, xs = np.mgrid[0:height, 0:width]
    blob = np.exp(-((xs - x0) ** 2 + (ys - y0) ** 2) / (2 * sigma ** 2))
    return blob + rng.uniform(0.0, background, size=(height, width))


def pdc_oracle_report(decode: Callable[[np.ndarray, float], Tuple[float, float]], thresholds: Sequence[float],
                      n_cases: int = 1000, height: int = 16, width: int = 16, seed: int = 0) -> OracleReport:
    """
    Compare a PDC implementation with ``oracle_centroid`` on random heatmaps.

    Case ``i`` uses the heatmap drawn from seed ``seed + i`` and threshold
    ``thresholds[i % len(thresholds)]``.

    Args:
        decode (Callable): ``decode(heatmap, threshold) -> (x, y)``.
        thresholds (Sequence[float]): Thresholds cycled over the cases.
        n_cases (int): Number of random heatmaps.

    Returns:
        OracleReport: Worst absolute/relative coordinate discrepancy.
    """
    worst_abs = 0.0
    worst_rel = 0.0
    worst_seed = seed
    for i in range(n_cases):
        case_seed = seed + i
        heatmap = random_single_mode_heatmap(np.random.default_rng(case_seed), height, width)
        threshold = thresholds[i % len(thresholds)]
        fast = np.array(decode(heatmap, threshold))
        slow = np.array(oracle_centroid(heatmap, threshold))
        abs_err = float(np.max(np.abs(fast - slow)))
        rel_err = float(np.max(np.abs(fast - slow) / np.maximum(1.0, np.abs(slow))))
        if abs_err > worst_abs:
            worst_abs, worst_seed = abs_err, case_seed
        worst_rel = max(worst_rel, rel_err)
    logger.info(f"PDC oracle: {n_cases} cases, max abs discrepancy {worst_abs:.3e} (seed {worst_seed})")
    return OracleReport(max_abs_discrepancy=worst_abs, max_rel_discrepancy=worst_rel,
                        n_cases=n_cases, worst_case_seed=worst_seed)


def metrics_oracle_report(fast: MetricsReport, slow: MetricsReport, case_seed: int = 0) -> OracleReport:
    """Discrepancy between two reports over the scalar metrics they share."""
    names = ("nme", "nrmse", "fr", "auc", "mcv", "mav")
    diffs = [abs(getattr(fast, name) - getattr(slow, name)) for name in names]
    rels = [d / max(1.0, abs(getattr(slow, name))) for d, name in zip(diffs, names)]
    return OracleReport(max_abs_discrepancy=max(diffs), max_rel_discrepancy=max(rels),
                        n_cases=1, worst_case_seed=case_seed)
