"""
Export of the jitter loss as a surface over the scalar errors of two adjacent
frames, and of its modulation and pixel-loss curves along one axis.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from apps.errors import ConfigError
from apps.losses.jitter import JitterConfig, decomposed_jitter_loss, jitter_modulation
from apps.losses.pixel_losses import AdaptiveWingLoss, GemanMcClureLoss, L2Loss

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 16
SURFACE_COLUMNS = ["e_t", "e_prev", "pixel_term", "modulated_term", "total"]
CURVE_COLUMNS = ["x", "psi", "gm_loss", "gm_grad", "l2_grad", "awing_grad"]
# Curves run to this multiple of theta.
CURVE_SPAN = 3.0


def export_loss_surface(config: JitterConfig, grid_resolution: int = 65) -> List[Dict[str, float]]:
    """
    Evaluate both loss terms on a ``grid_resolution x grid_resolution`` grid over ``[-1, 1]^2``.

    Args:
        config (JitterConfig): Pixel loss, theta and lambda.
        grid_resolution (int): Samples per axis, at least 16. Odd counts include 0.

    Returns:
        List[Dict[str, float]]: Rows with ``SURFACE_COLUMNS``, ``e_prev`` varying fastest.
    """
    if grid_resolution < MIN_RESOLUTION:
        raise ConfigError(f"grid_resolution must be at least {MIN_RESOLUTION}, got {grid_resolution}")
    axis = np.linspace(-1.0, 1.0, grid_resolution)
    e_t, e_prev = np.meshgrid(axis, axis, indexing="ij")
    pixel_term, modulated_term = decomposed_jitter_loss(e_t, e_prev, config)
    total = pixel_term + modulated_term
    return [
        {
            "e_t": float(e_t[i, j]),
            "e_prev": float(e_prev[i, j]),
            "pixel_term": float(pixel_term[i, j]),
            "modulated_term": float(modulated_term[i, j]),
            "total": float(total[i, j]),
        }
        for i in range(grid_resolution)
        for j in range(grid_resolution)
    ]


def export_loss_curves(config: JitterConfig, resolution: int = 121) -> List[Dict[str, float]]:
    """
    Sample the modulation and the pixel-loss curves along one axis ``x`` in ``[0, CURVE_SPAN * theta]``.

    ``psi`` is the modulation for a normalised inconsistency ``x``, i.e. an
    error jump of ``x * (||c|| + xi)`` against a unit ground-truth offset.
    ``gm_loss`` and ``gm_grad`` are the value and derivative of the
    Geman-McClure loss at residual ``x``; ``l2_grad`` and ``awing_grad`` are
    the L2 and Adaptive Wing derivatives at the same residual on a foreground
    pixel (target 1).

    Args:
        config (JitterConfig): Supplies theta and xi.
        resolution (int): Samples along ``x``, at least 16.

    Returns:
        List[Dict[str, float]]: Rows with ``CURVE_COLUMNS`` in increasing ``x``.
    """
    if resolution < MIN_RESOLUTION:
        raise ConfigError(f"resolution must be at least {MIN_RESOLUTION}, got {resolution}")
    x = np.linspace(0.0, CURVE_SPAN * config.theta, resolution)
    offset = np.zeros((resolution, 2))
    offset[:, 0] = 1.0
    u_t = offset.copy()
    u_t[:, 0] += x * (1.0 + config.xi)
    psi = jitter_modulation(u_t, offset, np.zeros_like(offset), np.zeros_like(offset), config)
    gm_loss, gm_grad = GemanMcClureLoss(config.theta).elementwise(x, np.zeros_like(x))
    _, l2_grad = L2Loss().elementwise(x, np.ones_like(x))
    _, awing_grad = AdaptiveWingLoss().elementwise(x, np.ones_like(x))
    columns = (x, psi, gm_loss, gm_grad, l2_grad, awing_grad)
    return [{name: float(values[i]) for name, values in zip(CURVE_COLUMNS, columns)} for i in range(resolution)]


def write_loss_surface_csv(rows: List[Dict[str, float]], path: Union[str, Path],
                           columns: Sequence[str] = SURFACE_COLUMNS) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns))
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"Loss surface written to {path}")
