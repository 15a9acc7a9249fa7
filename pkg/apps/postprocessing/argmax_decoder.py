"""
Integer argmax decoding.
"""

from typing import Tuple

import numpy as np

from apps.heatmaps.heatmap import validate_heatmap
from .base import HeatmapDecoder


def argmax_location(heatmap: np.ndarray) -> Tuple[int, int]:
    """Row/column of the maximum; ties go to the smallest row, then column."""
    # np.argmax returns the first hit in row-major order
    row, col = np.unravel_index(int(np.argmax(heatmap)), heatmap.shape)
    return int(row), int(col)


class ArgmaxDecoder(HeatmapDecoder):
    name = "argmax"

    def decode(self, heatmap: np.ndarray) -> Tuple[float, float]:
        """
        Return the integer location of the maximum value.

        An all-equal map decodes to ``(0, 0)`` by the tie rule.
        """
        row, col = argmax_location(validate_heatmap(heatmap))
        return float(col), float(row)
