"""
Synthetic face sequences and the heatmap backbones that observe them.

A sequence jointly shifts a face template by a bounded integer random walk.
Ground-truth heatmaps are synthesised from the shifted landmarks; backbone
heatmaps come from a ``HeatmapBackbone``, by default the simulated detector
that displaces each peak and adds noise and blur.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from apps.errors import ConfigError, FileFormatError, LandmarkOutOfBoundsError, ShapeMismatchError
from apps.heatmaps.degradation import DegradationConfig, add_gaussian_noise, gaussian_blur
from apps.heatmaps.heatmap import make_gaussian_heatmap, validate_landmarks
from apps.heatmaps.io_utils import read_hms, read_landmarks_csv, write_hms, write_landmarks_csv
from .config import ExperimentConfig

logger = logging.getLogger(__name__)

TRAIN_SPLIT = "train"
TEST_SPLIT = "test"
SPLIT_CODES = {TRAIN_SPLIT: 0, TEST_SPLIT: 1}
MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = "stable-align-dataset"
MANIFEST_VERSION = 1

# eyes, nose tip, mouth corners in normalised face-box coordinates
FIVE_POINT_TEMPLATE = np.array([
    [0.30, 0.35],
    [0.70, 0.35],
    [0.50, 0.55],
    [0.35, 0.75],
    [0.65, 0.75],
])


@dataclass
class SequenceSample:
    """
    One synthetic (or recorded) video.

    Attributes:
        gt_landmarks (np.ndarray): ``(T, K, 2)`` ground-truth landmarks.
        gt_heatmaps (np.ndarray): ``(T, K, H, W)`` ground-truth heatmaps.
        backbone_heatmaps (np.ndarray): ``(T, K, H, W)`` first-stage heatmaps.
        seed (int): Seed the sample was generated from.
    """

    gt_landmarks: np.ndarray
    gt_heatmaps: np.ndarray
    backbone_heatmaps: np.ndarray
    seed: int = 0

    def __post_init__(self):
        n_frames = len(self.gt_landmarks)
        if n_frames == 0:
            raise ShapeMismatchError("A sequence needs at least one frame")
        if len(self.gt_heatmaps) != n_frames or len(self.backbone_heatmaps) != n_frames:
            raise ShapeMismatchError(
                f"Frame counts differ: {n_frames} landmark sets, {len(self.gt_heatmaps)} gt heatmaps, "
                f"{len(self.backbone_heatmaps)} backbone heatmaps"
            )
        if np.shape(self.gt_heatmaps) != np.shape(self.backbone_heatmaps):
            raise ShapeMismatchError(
                f"gt heatmaps {np.shape(self.gt_heatmaps)} and backbone heatmaps "
                f"{np.shape(self.backbone_heatmaps)} differ in shape"
            )
        if np.shape(self.gt_heatmaps)[1] != np.shape(self.gt_landmarks)[1]:
            raise ShapeMismatchError(
                f"{np.shape(self.gt_landmarks)[1]} landmarks for {np.shape(self.gt_heatmaps)[1]} heatmap channels"
            )

    @property
    def n_frames(self) -> int:
        return len(self.gt_landmarks)

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return tuple(np.shape(self.gt_heatmaps)[2:])


class HeatmapBackbone:
    """First-stage detector seen as an opaque heatmap source."""

    def predict(self, gt_landmarks: np.ndarray, rng: np.random.Generator, sequence_index: int = 0) -> np.ndarray:
        """
        Heatmaps of one sequence.

        Args:
            gt_landmarks (np.ndarray): ``(T, K, 2)`` true landmark positions.
            rng (np.random.Generator): Sequence-local generator.
            sequence_index (int): Position of the sequence in its dataset.

        Returns:
            np.ndarray: ``(T, K, H, W)`` heatmaps.
        """
        raise NotImplementedError("Backbones must implement predict().")


class SimulatedBackbone(HeatmapBackbone):
    """
    Imperfect detector: every peak is displaced by i.i.d. Gaussian jitter,
    then pixel noise and blur are applied.
    """

    def __init__(self, height: int, width: int, heatmap_sigma: float, degradation: DegradationConfig):
        self.height = height
        self.width = width
        self.heatmap_sigma = heatmap_sigma
        self.degradation = degradation

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "SimulatedBackbone":
        return cls(config.grid.height, config.grid.width, config.heatmap_sigma, config.degradation)

    def predict(self, gt_landmarks, rng, sequence_index=0):
        frames = []
        for points in np.asarray(gt_landmarks, dtype=np.float64):
            jitter = rng.normal(0.0, self.degradation.peak_jitter_sigma, size=points.shape)
            displaced = points + jitter
            displaced[:, 0] = np.clip(displaced[:, 0], 0.0, self.width - 1)
            displaced[:, 1] = np.clip(displaced[:, 1], 0.0, self.height - 1)
            stack = make_gaussian_heatmap(displaced, self.height, self.width, self.heatmap_sigma)
            noise_seed = int(rng.integers(2 ** 32))
            stack = add_gaussian_noise(stack, self.degradation.noise_sigma, noise_seed)
            frames.append(gaussian_blur(stack, self.degradation.blur_sigma))
        return np.asarray(frames)


class RecordedBackbone(HeatmapBackbone):
    """Serves pre-computed heatmaps, one ``(T, K, H, W)`` tensor per sequence."""

    def __init__(self, recordings: Sequence[np.ndarray]):
        self.recordings = [np.asarray(frames, dtype=np.float64) for frames in recordings]

    @classmethod
    def from_files(cls, paths: Sequence[Union[str, Path]]) -> "RecordedBackbone":
        return cls([read_hms(path) for path in paths])

    def predict(self, gt_landmarks, rng, sequence_index=0):
        if not 0 <= sequence_index < len(self.recordings):
            raise ShapeMismatchError(f"No recording for sequence {sequence_index} ({len(self.recordings)} available)")
        frames = self.recordings[sequence_index]
        expected = np.shape(gt_landmarks)[:2]
        if frames.shape[:2] != expected:
            raise ShapeMismatchError(
                f"Recording {sequence_index} has (T, K) = {frames.shape[:2]}, landmarks have {expected}"
            )
        return frames.copy()


def border_margin(config: ExperimentConfig) -> float:
    """Minimum distance between a base landmark and the grid border."""
    return 3.0 * config.heatmap_sigma + config.shift_range


def face_template(config: ExperimentConfig) -> np.ndarray:
    """
    Integer base landmarks of a frontal face centred in the grid.

    Five landmarks follow the eyes/nose/mouth-corners layout; other counts
    are spread on an ellipse. The face box keeps one extra pixel of margin
    so a ±1 px placement offset stays inside the allowed area.

    Raises:
        ConfigError: If the grid is too small for the margin.
    """
    margin = border_margin(config)
    low_x, high_x = math.ceil(margin) + 1, math.floor(config.grid.width - 1 - margin) - 1
    low_y, high_y = math.ceil(margin) + 1, math.floor(config.grid.height - 1 - margin) - 1
    if low_x > high_x or low_y > high_y:
        raise ConfigError(
            f"A {config.grid.height}x{config.grid.width} grid leaves no room for a face with border margin {margin}"
        )
    if config.landmarks == len(FIVE_POINT_TEMPLATE):
        unit = FIVE_POINT_TEMPLATE
    else:
        angles = 2.0 * np.pi * np.arange(config.landmarks) / config.landmarks
        unit = np.stack([0.5 + 0.35 * np.cos(angles), 0.5 + 0.35 * np.sin(angles)], axis=1)
    xs = np.rint(low_x + unit[:, 0] * (high_x - low_x))
    ys = np.rint(low_y + unit[:, 1] * (high_y - low_y))
    return np.stack([xs, ys], axis=1)


def shift_walk(n_frames: int, shift_range: int, rng: np.random.Generator) -> np.ndarray:
    """``(T, 2)`` integer shifts: a ±1 random walk per axis clamped to ``[-shift_range, shift_range]``."""
    shifts = np.zeros((n_frames, 2))
    for t in range(1, n_frames):
        step = rng.integers(-1, 2, size=2)
        shifts[t] = np.clip(shifts[t - 1] + step, -shift_range, shift_range)
    return shifts


def generate_sequence(base: np.ndarray, config: ExperimentConfig, seed: Optional[int] = None,
                      backbone: Optional[HeatmapBackbone] = None, sequence_index: int = 0) -> SequenceSample:
    """
    Generate one shifted sequence and its backbone heatmaps.

    Args:
        base (np.ndarray): ``(K, 2)`` base landmarks.
        config (ExperimentConfig): Grid, sigma, shift range, frame range and degradation.
        seed (Optional[int]): Sequence seed; ``config.seed`` when None.
        backbone (Optional[HeatmapBackbone]): Heatmap source; the simulated detector when None.
        sequence_index (int): Index passed on to the backbone.

    Returns:
        SequenceSample: The generated sequence.

    Raises:
        LandmarkOutOfBoundsError: If a base landmark is closer than ``3 sigma + shift_range`` to a border.
    """
    base = validate_landmarks(base)
    if base.shape[0] != config.landmarks:
        raise ShapeMismatchError(f"Base holds {base.shape[0]} landmarks, config expects {config.landmarks}")
    margin = border_margin(config)
    height, width = config.grid.height, config.grid.width
    too_close = ((base[:, 0] < margin) | (base[:, 0] > width - 1 - margin)
                 | (base[:, 1] < margin) | (base[:, 1] > height - 1 - margin))
    if np.any(too_close):
        index = int(np.flatnonzero(too_close)[0])
        raise LandmarkOutOfBoundsError(
            f"Base landmark {index} at {tuple(base[index])} is closer than {margin} px to the grid border"
        )

    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    n_frames = int(rng.integers(config.min_frames, config.max_frames + 1))
    shifts = shift_walk(n_frames, config.shift_range, rng)
    gt_landmarks = base[None, :, :] + shifts[:, None, :]
    gt_heatmaps = np.asarray([make_gaussian_heatmap(points, height, width, config.heatmap_sigma)
                              for points in gt_landmarks])
    backbone = backbone or SimulatedBackbone.from_config(config)
    backbone_heatmaps = backbone.predict(gt_landmarks, rng, sequence_index)
    return SequenceSample(gt_landmarks=gt_landmarks, gt_heatmaps=gt_heatmaps,
                          backbone_heatmaps=backbone_heatmaps, seed=seed)


def sequence_seed(config: ExperimentConfig, split: str, index: int) -> Tuple[np.ndarray, int]:
    """
    Placement offset and generation seed of sequence ``index`` in ``split``.

    Both derive only from ``(seed, degradation.seed, split, index)`` so
    sequences can be produced in any order.
    """
    rng = np.random.default_rng([config.seed, config.degradation.seed, SPLIT_CODES[split], index])
    offset = rng.integers(-1, 2, size=2).astype(np.float64)
    return offset, int(rng.integers(2 ** 32))


def generate_dataset(config: ExperimentConfig, split: str = TRAIN_SPLIT,
                     backbone: Optional[HeatmapBackbone] = None,
                     n_sequences: Optional[int] = None) -> List[SequenceSample]:
    """
    Generate the train or test split of an experiment.

    Args:
        config (ExperimentConfig): Experiment description.
        split (str): ``"train"`` or ``"test"``.
        backbone (Optional[HeatmapBackbone]): Heatmap source; simulated when None.
        n_sequences (Optional[int]): Overrides the split size from ``config.dataset``.

    Returns:
        List[SequenceSample]: Sequences in index order.
    """
    if split not in SPLIT_CODES:
        raise ConfigError(f"Unknown split {split!r}; expected one of {sorted(SPLIT_CODES)}")
    if n_sequences is None:
        n_sequences = config.dataset.train_sequences if split == TRAIN_SPLIT else config.dataset.test_sequences
    template = face_template(config)
    samples = []
    for index in range(n_sequences):
        offset, seed = sequence_seed(config, split, index)
        samples.append(generate_sequence(template + offset, config, seed, backbone, index))
    logger.info(f"Generated {len(samples)} {split} sequences "
                f"({sum(s.n_frames for s in samples)} frames, grid {config.grid.height}x{config.grid.width})")
    return samples


def save_dataset(out_dir: Union[str, Path], splits: Dict[str, List[SequenceSample]],
                 config: ExperimentConfig) -> Path:
    """
    Write sequences as ``.hms`` backbone heatmaps plus landmark CSVs, with a manifest.

    Args:
        out_dir (Union[str, Path]): Destination directory (created if missing).
        splits (Dict[str, List[SequenceSample]]): Sequences per split name.
        config (ExperimentConfig): Supplies grid, K and heatmap sigma for the manifest.

    Returns:
        Path: Path of the written manifest.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for split, samples in splits.items():
        for index, sample in enumerate(samples):
            name = f"{split}_{index:04d}"
            write_hms(out_dir / f"{name}.hms", sample.backbone_heatmaps)
            write_landmarks_csv(out_dir / f"{name}.csv", sample.gt_landmarks)
            entries.append({
                "name": name,
                "split": split,
                "heatmaps": f"{name}.hms",
                "landmarks": f"{name}.csv",
                "frames": sample.n_frames,
                "seed": sample.seed,
            })
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "grid": [config.grid.height, config.grid.width],
        "landmarks": config.landmarks,
        "heatmap_sigma": config.heatmap_sigma,
        "sequences": entries,
    }
    manifest_path = out_dir / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {len(entries)} sequences to {out_dir}")
    return manifest_path


def read_manifest(data_dir: Union[str, Path]) -> Dict:
    """
    Read and check a dataset manifest.

    Raises:
        FileNotFoundError: If the manifest is missing.
        FileFormatError: If it is not a dataset manifest.
    """
    path = Path(data_dir) / MANIFEST_NAME
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(manifest, dict) or manifest.get("format") != MANIFEST_FORMAT:
        raise FileFormatError(f"{path} is not a {MANIFEST_FORMAT} manifest")
    if manifest.get("version") != MANIFEST_VERSION:
        raise FileFormatError(f"{path} has unsupported version {manifest.get('version')}")
    return manifest


def load_dataset(data_dir: Union[str, Path], split: Optional[str] = None) -> List[SequenceSample]:
    """
    Load the sequences of a dataset directory, optionally one split only.

    Ground-truth heatmaps are re-synthesised from the landmark CSVs with the
    manifest's heatmap sigma.

    Raises:
        FileFormatError: If a file disagrees with the manifest.
    """
    data_dir = Path(data_dir)
    manifest = read_manifest(data_dir)
    height, width = manifest["grid"]
    sigma = manifest["heatmap_sigma"]
    samples = []
    for entry in manifest["sequences"]:
        if split is not None and entry["split"] != split:
            continue
        backbone_heatmaps = read_hms(data_dir / entry["heatmaps"])
        gt_landmarks = read_landmarks_csv(data_dir / entry["landmarks"])
        if backbone_heatmaps.shape != (entry["frames"], manifest["landmarks"], height, width):
            raise FileFormatError(f"{entry['heatmaps']} has shape {backbone_heatmaps.shape}, manifest disagrees")
        if gt_landmarks.shape != (entry["frames"], manifest["landmarks"], 2):
            raise FileFormatError(f"{entry['landmarks']} has shape {gt_landmarks.shape}, manifest disagrees")
        gt_heatmaps = np.asarray([make_gaussian_heatmap(points, height, width, sigma) for points in gt_landmarks])
        samples.append(SequenceSample(gt_landmarks=gt_landmarks, gt_heatmaps=gt_heatmaps,
                                      backbone_heatmaps=backbone_heatmaps, seed=entry["seed"]))
    logger.info(f"Loaded {len(samples)} sequences from {data_dir}" + (f" ({split})" if split else ""))
    return samples
