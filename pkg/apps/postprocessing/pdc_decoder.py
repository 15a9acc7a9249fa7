"""
Probability Density Centralization (PDC) decoder.

Values below the threshold are zeroed, then the heatmap centre is the
mass-weighted centroid of the remaining pixels. Column and row indices are
weighted 1-based as in the reference pseudocode and converted back to the
0-based convention used everywhere else in the toolkit.
"""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from apps.errors import DegenerateHeatmapError
from apps.heatmaps.heatmap import validate_heatmap
from .base import HeatmapDecoder

DEFAULT_PDC_THRESHOLD = 0.2


class PDCConfig(BaseModel):
    """Threshold below which heatmap values are discarded."""

    model_config = ConfigDict(extra="forbid")

    threshold: float = Field(DEFAULT_PDC_THRESHOLD, ge=0.0, lt=1.0)


class PDCDecoder(HeatmapDecoder):
    name = "pdc"

    def __init__(self, config: PDCConfig = None):
        self.config = config or PDCConfig()

    @property
    def threshold(self) -> float:
        return self.config.threshold

    def decode(self, heatmap: np.ndarray) -> Tuple[float, float]:
        """
        Decode with the thresholded mass centroid.

        Raises:
            DegenerateHeatmapError: If no positive mass survives the threshold.
        """
        phi = validate_heatmap(heatmap)
        phi = np.where(phi < self.threshold, 0.0, phi)
        sum_phi = phi.sum()
        if not sum_phi > 0:
            raise DegenerateHeatmapError(
                f"No heatmap mass survives threshold {self.threshold} (max value {float(np.max(heatmap)):.4g})"
            )
        height, width = phi.shape
        sum_x = np.dot(np.arange(1, width + 1, dtype=np.float64), phi.sum(axis=0))
        sum_y = np.dot(np.arange(1, height + 1, dtype=np.float64), phi.sum(axis=1))
        return float(sum_x / sum_phi - 1.0), float(sum_y / sum_phi - 1.0)
