"""
Readers and writers for the on-disk heatmap tensor (``.hms``) and landmark
CSV formats.

``.hms`` layout (little-endian): magic ``HMS1``, u32 T, u32 K, u32 H, u32 W,
then ``T*K*H*W`` float32 values, frame-major, channel-major, row-major.
The landmark CSV has the header ``frame,landmark,x,y`` with 0-based indices.
"""

import csv
import struct
from pathlib import Path
from typing import Union

import numpy as np

from apps.errors import FileFormatError

HMS_MAGIC = b"HMS1"
_HMS_HEADER = struct.Struct("<4I")
LANDMARK_CSV_HEADER = ["frame", "landmark", "x", "y"]

PathLike = Union[str, Path]


def write_hms(path: PathLike, frames: np.ndarray) -> None:
    """
    Write a ``(T, K, H, W)`` heatmap tensor to an ``.hms`` file.

    Args:
        path (PathLike): Destination file.
        frames (np.ndarray): Heatmap tensor; stored as float32.
    """
    frames = np.asarray(frames)
    if frames.ndim != 4:
        raise FileFormatError(f"HMS tensors must be 4-D (T, K, H, W), got shape {frames.shape}")
    with Path(path).open("wb") as f:
        f.write(HMS_MAGIC)
        f.write(_HMS_HEADER.pack(*frames.shape))
        f.write(np.ascontiguousarray(frames, dtype="<f4").tobytes())


def read_hms(path: PathLike) -> np.ndarray:
    """
    Read an ``.hms`` file.

    Returns:
        np.ndarray: ``(T, K, H, W)`` float64 tensor.

    Raises:
        FileFormatError: On a bad magic number or truncated payload.
    """
    data = Path(path).read_bytes()
    if data[:4] != HMS_MAGIC:
        raise FileFormatError(f"{path} is not an HMS1 file (magic {data[:4]!r})")
    header_end = 4 + _HMS_HEADER.size
    if len(data) < header_end:
        raise FileFormatError(f"{path} has a truncated header")
    shape = _HMS_HEADER.unpack(data[4:header_end])
    expected = int(np.prod(shape)) * 4
    payload = data[header_end:]
    if len(payload) != expected:
        raise FileFormatError(f"{path} holds {len(payload)} payload bytes, expected {expected} for shape {shape}")
    return np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float64)


def write_landmarks_csv(path: PathLike, landmarks: np.ndarray) -> None:
    """
    Write a ``(T, K, 2)`` landmark series as CSV.

    Coordinates are written with ``repr`` so they read back bit-exactly.
    """
    landmarks = np.asarray(landmarks, dtype=np.float64)
    if landmarks.ndim != 3 or landmarks.shape[2] != 2:
        raise FileFormatError(f"Landmark series must have shape (T, K, 2), got {landmarks.shape}")
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(LANDMARK_CSV_HEADER)
        for frame, points in enumerate(landmarks):
            for index, (x, y) in enumerate(points):
                writer.writerow([frame, index, repr(float(x)), repr(float(y))])


def _parse_landmark_row(path: PathLike, line: int, row: list) -> tuple:
    try:
        frame, index, x, y = row
        parsed = (int(frame), int(index), float(x), float(y))
    except ValueError as exc:
        raise FileFormatError(f"{path}:{line}: malformed landmark row {row!r} ({exc})") from exc
    if parsed[0] < 0 or parsed[1] < 0:
        raise FileFormatError(f"{path}:{line}: negative frame or landmark index in {row!r}")
    if not (np.isfinite(parsed[2]) and np.isfinite(parsed[3])):
        raise FileFormatError(f"{path}:{line}: non-finite coordinate in {row!r}")
    return parsed


def read_landmarks_csv(path: PathLike) -> np.ndarray:
    """
    Read a landmark CSV back into a ``(T, K, 2)`` array.

    Raises:
        FileFormatError: On a wrong header, a malformed row or a non-rectangular frame/landmark table.
    """
    with Path(path).open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != LANDMARK_CSV_HEADER:
            raise FileFormatError(f"{path} has header {header}, expected {LANDMARK_CSV_HEADER}")
        rows = [_parse_landmark_row(path, reader.line_num, row) for row in reader]
    if not rows:
        raise FileFormatError(f"{path} holds no landmarks")
    n_frames = max(row[0] for row in rows) + 1
    n_landmarks = max(row[1] for row in rows) + 1
    if len(rows) != n_frames * n_landmarks:
        raise FileFormatError(f"{path} does not hold a full {n_frames}x{n_landmarks} frame/landmark table")
    landmarks = np.full((n_frames, n_landmarks, 2), np.nan)
    for frame, index, x, y in rows:
        landmarks[frame, index] = (x, y)
    if np.isnan(landmarks).any():
        raise FileFormatError(f"{path} has duplicated or missing frame/landmark entries")
    return landmarks
