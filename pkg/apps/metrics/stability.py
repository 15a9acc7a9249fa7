"""
Stability metrics for landmark trajectories.

CVar (coefficient of variation) measures the global dispersion of a series,
AVar (Allan variance) its frame-to-frame fluctuation. MCV and MAV average them
over videos. A video is an array whose first axis is time, typically
``(T, K, 2)``; every trailing element is an independent scalar series.
"""

from typing import Sequence

import numpy as np

from apps.errors import MetricDomainError


def _series(samples: np.ndarray) -> np.ndarray:
    series = np.asarray(samples, dtype=np.float64)
    if series.ndim == 0 or series.shape[0] < 2:
        raise MetricDomainError(f"At least two samples are required, got shape {series.shape}")
    return series


def _spread(series: np.ndarray) -> np.ndarray:
    # deviations from the first sample: a constant series has exactly zero spread
    return (series - series[0]).std(axis=0, ddof=1)


def cvar(samples: Sequence[float]) -> float:
    """
    Coefficient of variation: sample standard deviation (``N - 1``) over the mean.

    Raises:
        MetricDomainError: If fewer than two samples are given or the mean is zero.
    """
    series = _series(samples).ravel()
    mean = series.mean()
    if mean == 0:
        raise MetricDomainError("CVar is undefined for a zero-mean series")
    return float(_spread(series) / mean)


def video_cvar(video: np.ndarray, offset: float = 0.0) -> float:
    """
    CVar of every landmark coordinate series of one video, averaged.

    Args:
        video (np.ndarray): ``(T, ...)`` trajectory.
        offset (float): Added to every coordinate before the CVar so that
            0-based positions never produce a zero mean.
    """
    series = _series(video) + offset
    mean = series.mean(axis=0)
    if np.any(mean == 0):
        raise MetricDomainError("CVar is undefined for a zero-mean coordinate series")
    return float(np.mean(_spread(series) / mean))


def mcv(videos: Sequence[np.ndarray], offset: float = 0.0) -> float:
    """Mean over videos of the per-video averaged CVar."""
    if len(videos) == 0:
        raise MetricDomainError("MCV needs at least one video")
    return float(np.mean([video_cvar(video, offset) for video in videos]))


def avar(series: Sequence[float]) -> float:
    """Allan variance ``sum (u_{t+1} - u_t)^2 / (2 (T - 1))`` of a scalar series."""
    values = _series(series).ravel()
    return float(np.sum(np.diff(values) ** 2) / (2.0 * (values.size - 1)))


def video_avar(video: np.ndarray) -> float:
    """Allan variance of every coordinate series of one video, averaged."""
    series = _series(video)
    n_frames = series.shape[0]
    return float(np.mean(np.sum(np.diff(series, axis=0) ** 2, axis=0) / (2.0 * (n_frames - 1))))


def mav(videos: Sequence[np.ndarray]) -> float:
    """Mean Allan variance over landmarks, axes and videos."""
    if len(videos) == 0:
        raise MetricDomainError("MAV needs at least one video")
    return float(np.mean([video_avar(video) for video in videos]))
