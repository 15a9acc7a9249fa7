"""
MetricsReport: the accuracy and stability summary of one evaluation run,
with its JSON and flat CSV serialisations.
"""

import csv
import math
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tabulate import tabulate

from apps.errors import ShapeMismatchError
from .accuracy import DEFAULT_CUTOFF, auc_ced, fr, landmark_errors, nrmse_sequence
from .normalization import NormalizationRule
from .stability import mav, mcv

SCALAR_FIELDS = ["nme", "nrmse", "fr", "auc", "mcv", "mav", "n_sequences", "n_frames", "decode_fallbacks"]
PER_LANDMARK_FIELDS = ["nme", "fr", "auc", "mcv", "mav"]


class MetricsReport(BaseModel):
    """
    Accuracy (NME/NRMSE x100, FR, AUC) and stability (MCV, MAV) of a dataset.

    MCV is unitless; MAV is in px^2 of the heatmap grid.
    """

    model_config = ConfigDict(extra="forbid")

    nme: float
    nrmse: float
    fr: float = Field(ge=0.0, le=1.0)
    auc: float = Field(ge=0.0, le=1.0)
    mcv: float
    mav: float
    per_landmark: Dict[str, List[float]] = Field(default_factory=dict)
    n_sequences: int = 0
    n_frames: int = 0
    decode_fallbacks: int = 0
    units: str = "px"

    @model_validator(mode="after")
    def _finite_non_negative(self) -> "MetricsReport":
        for name in ("nme", "nrmse", "fr", "auc", "mcv", "mav"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"Metric {name} must be finite and non-negative, got {value}")
        return self

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    def to_csv_row(self) -> Dict[str, Union[float, int]]:
        """Flat row: scalar metrics followed by ``<metric>_k<index>`` columns."""
        row = {name: getattr(self, name) for name in SCALAR_FIELDS}
        for name in PER_LANDMARK_FIELDS:
            for index, value in enumerate(self.per_landmark.get(name, [])):
                row[f"{name}_k{index}"] = value
        return row

    def summary_table(self) -> str:
        rows = [[name, getattr(self, name)] for name in SCALAR_FIELDS]
        return tabulate(rows, headers=["Metric", "Value"], tablefmt="simple")


def write_metrics(report: MetricsReport, json_path: Path, csv_path: Path) -> None:
    """Write the report as JSON and as a one-row CSV."""
    Path(json_path).write_text(report.to_json() + "\n", encoding="utf-8")
    row = report.to_csv_row()
    with Path(csv_path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(row))
        writer.writeheader()
        writer.writerow(row)


def frame_nme_matrix(predictions: Sequence[np.ndarray], truths: Sequence[np.ndarray],
                     rule: NormalizationRule) -> np.ndarray:
    """Per-frame, per-landmark normalised errors as fractions, shape ``(frames, K)``."""
    rows = []
    for pred_video, truth_video in zip(predictions, truths):
        for pred, truth in zip(pred_video, truth_video):
            rows.append(landmark_errors(pred, truth) / rule.normalizer(truth))
    return np.asarray(rows)


def compute_metrics(predictions: Sequence[np.ndarray], truths: Sequence[np.ndarray], rule: NormalizationRule,
                    coordinate_offset: float = 0.0, cutoff: float = DEFAULT_CUTOFF,
                    decode_fallbacks: int = 0) -> MetricsReport:
    """
    Build a MetricsReport from decoded trajectories.

    Args:
        predictions (Sequence[np.ndarray]): One ``(T, K, 2)`` array per video.
        truths (Sequence[np.ndarray]): Matching ground-truth trajectories.
        rule (NormalizationRule): Face-scale normaliser.
        coordinate_offset (float): Offset added to coordinates before CVar.
        cutoff (float): FR / AUC cutoff on per-frame NME fractions.
        decode_fallbacks (int): Decoder fallbacks observed while decoding.

    Returns:
        MetricsReport: Dataset-level metrics with per-landmark breakdowns.
    """
    if len(predictions) != len(truths) or len(predictions) == 0:
        raise ShapeMismatchError(f"Need matching non-empty video lists, got {len(predictions)} and {len(truths)}")
    for pred_video, truth_video in zip(predictions, truths):
        if np.shape(pred_video) != np.shape(truth_video):
            raise ShapeMismatchError(f"Trajectory shapes differ: {np.shape(pred_video)} vs {np.shape(truth_video)}")

    errors = frame_nme_matrix(predictions, truths, rule)
    all_preds = [frame for video in predictions for frame in video]
    all_truths = [frame for video in truths for frame in video]
    frame_nme = errors.mean(axis=1)
    n_landmarks = errors.shape[1]

    per_landmark = {
        "nme": [float(errors[:, k].mean() * 100.0) for k in range(n_landmarks)],
        "fr": [fr(errors[:, k], cutoff) for k in range(n_landmarks)],
        "auc": [auc_ced(errors[:, k], cutoff) for k in range(n_landmarks)],
        "mcv": [mcv([video[:, k] for video in predictions], coordinate_offset) for k in range(n_landmarks)],
        "mav": [mav([video[:, k] for video in predictions]) for k in range(n_landmarks)],
    }
    return MetricsReport(
        nme=float(errors.mean() * 100.0),
        nrmse=nrmse_sequence(all_preds, all_truths, rule),
        fr=fr(frame_nme, cutoff),
        auc=auc_ced(frame_nme, cutoff),
        mcv=mcv(predictions, coordinate_offset),
        mav=mav(predictions),
        per_landmark=per_landmark,
        n_sequences=len(predictions),
        n_frames=len(all_preds),
        decode_fallbacks=decode_fallbacks,
    )
