"""
Decoder selection and channel-wise decoding of heatmap stacks.
"""

import logging
from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from apps.errors import DegenerateHeatmapError
from apps.heatmaps.heatmap import validate_stack
from .argmax_decoder import ArgmaxDecoder
from .base import HeatmapDecoder
from .interp_decoder import InterpolationDecoder
from .pdc_decoder import DEFAULT_PDC_THRESHOLD, PDCConfig, PDCDecoder

logger = logging.getLogger(__name__)


class DecoderKind(str, Enum):
    ARGMAX = "argmax"
    INTERP = "interp"
    PDC = "pdc"


class DecoderConfig(BaseModel):
    """Decoder selection; ``threshold`` is only read by PDC."""

    model_config = ConfigDict(extra="forbid")

    kind: DecoderKind = DecoderKind.PDC
    threshold: float = Field(DEFAULT_PDC_THRESHOLD, ge=0.0, lt=1.0)


def make_decoder(config: DecoderConfig) -> HeatmapDecoder:
    """Instantiate the decoder named by ``config.kind``."""
    if config.kind is DecoderKind.ARGMAX:
        return ArgmaxDecoder()
    if config.kind is DecoderKind.INTERP:
        return InterpolationDecoder()
    return PDCDecoder(PDCConfig(threshold=config.threshold))


def decode_stack_with_fallbacks(stack: np.ndarray, decoder: HeatmapDecoder) -> Tuple[np.ndarray, int]:
    """
    Decode every channel of a stack, falling back to argmax on degenerate maps.

    Args:
        stack (np.ndarray): ``(K, H, W)`` heatmap stack.
        decoder (HeatmapDecoder): Decoder applied channel-wise.

    Returns:
        Tuple[np.ndarray, int]: ``(K, 2)`` landmark set and the number of
        channels that needed the argmax fallback.
    """
    stack = validate_stack(stack)
    fallback = ArgmaxDecoder()
    points = np.empty((stack.shape[0], 2), dtype=np.float64)
    n_fallbacks = 0
    for k, heatmap in enumerate(stack):
        try:
            points[k] = decoder.decode(heatmap)
        except DegenerateHeatmapError as exc:
            logger.warning(f"Channel {k}: {exc}; falling back to argmax")
            points[k] = fallback.decode(heatmap)
            n_fallbacks += 1
    return points, n_fallbacks


def decode_stack(stack: np.ndarray, decoder: HeatmapDecoder) -> np.ndarray:
    """Decode a ``(K, H, W)`` stack into a ``(K, 2)`` landmark set, order preserved."""
    points, _ = decode_stack_with_fallbacks(stack, decoder)
    return points
