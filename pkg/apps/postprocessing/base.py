"""
Base class for heatmap decoders.

Every post-processing method maps one heatmap to a 0-based sub-pixel
``(x, y)`` coordinate and is interchangeable inside the fine-tuning framework.
"""

from typing import Tuple

import numpy as np


class HeatmapDecoder:
    """Interface implemented by all decoders."""

    name = "base"

    def decode(self, heatmap: np.ndarray) -> Tuple[float, float]:
        """
        Decode a single heatmap.

        Args:
            heatmap (np.ndarray): ``(H, W)`` grid.

        Returns:
            Tuple[float, float]: ``(x, y)`` = ``(column, row)``, 0-based.
        """
        raise NotImplementedError("Decoders must implement decode().")
