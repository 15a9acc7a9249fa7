"""
Quarter-offset interpolation decoder.

The argmax location is moved by 0.25 px towards the larger neighbour on each
axis. No shift is applied on an axis where the peak touches the border or the
two neighbours are equal.
"""

from typing import Tuple

import numpy as np

from apps.heatmaps.heatmap import validate_heatmap
from .argmax_decoder import argmax_location
from .base import HeatmapDecoder

QUARTER_OFFSET = 0.25


def _offset(before: float, after: float) -> float:
    if after > before:
        return QUARTER_OFFSET
    if before > after:
        return -QUARTER_OFFSET
    return 0.0


class InterpolationDecoder(HeatmapDecoder):
    name = "interp"

    def decode(self, heatmap: np.ndarray) -> Tuple[float, float]:
        heatmap = validate_heatmap(heatmap)
        height, width = heatmap.shape
        row, col = argmax_location(heatmap)
        x, y = float(col), float(row)
        if 0 < col < width - 1:
            x += _offset(heatmap[row, col - 1], heatmap[row, col + 1])
        if 0 < row < height - 1:
            y += _offset(heatmap[row - 1, col], heatmap[row + 1, col])
        return x, y
