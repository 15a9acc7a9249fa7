"""
``.clm`` checkpoint files.

Layout (little-endian): magic ``CLM1``, u32 K, u32 C_h, u32 kernel size, then
every parameter as float64 in the order gate_weight, gate_bias, out_weight,
out_bias, each flattened row-major.
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from apps.errors import FileFormatError
from .convlstm import PARAMETER_ORDER, ConvLSTMModel

logger = logging.getLogger(__name__)

CLM_MAGIC = b"CLM1"
_CLM_HEADER = struct.Struct("<3I")


def save_checkpoint(path: Union[str, Path], model: ConvLSTMModel) -> None:
    """Write ``model`` to ``path``."""
    with Path(path).open("wb") as f:
        f.write(CLM_MAGIC)
        f.write(_CLM_HEADER.pack(model.input_channels, model.hidden_channels, model.kernel_size))
        for name in PARAMETER_ORDER:
            f.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())
    logger.info(f"Checkpoint written to {path}")


def load_checkpoint(path: Union[str, Path]) -> ConvLSTMModel:
    """
    Read a model written by ``save_checkpoint``.

    Raises:
        FileNotFoundError: If the file does not exist.
        FileFormatError: On a bad magic number, invalid dimensions or a wrong payload size.
    """
    data = Path(path).read_bytes()
    if data[:4] != CLM_MAGIC:
        raise FileFormatError(f"{path} is not a CLM1 checkpoint (magic {data[:4]!r})")
    header_end = 4 + _CLM_HEADER.size
    if len(data) < header_end:
        raise FileFormatError(f"{path} has a truncated header")
    n_landmarks, hidden, kernel = _CLM_HEADER.unpack(data[4:header_end])
    if n_landmarks < 1 or hidden < 1 or kernel % 2 == 0:
        raise FileFormatError(f"{path} declares invalid dimensions K={n_landmarks}, C_h={hidden}, kernel={kernel}")

    shapes = {
        "gate_weight": (4 * hidden, n_landmarks + hidden, kernel, kernel),
        "gate_bias": (4 * hidden,),
        "out_weight": (n_landmarks, hidden),
        "out_bias": (n_landmarks,),
    }
    expected = sum(int(np.prod(shape)) for shape in shapes.values()) * 8
    payload = data[header_end:]
    if len(payload) != expected:
        raise FileFormatError(f"{path} holds {len(payload)} parameter bytes, expected {expected}")

    params = {}
    offset = 0
    for name in PARAMETER_ORDER:
        size = int(np.prod(shapes[name]))
        params[name] = np.frombuffer(payload, dtype="<f8", count=size, offset=offset * 8).reshape(shapes[name]).copy()
        offset += size
    return ConvLSTMModel(n_landmarks, hidden, kernel, params)
