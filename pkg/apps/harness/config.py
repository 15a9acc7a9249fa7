"""
Experiment configuration.

Every section is a strict pydantic model: unknown keys are rejected and
missing keys fall back to the defaults below. Files are JSON or YAML; the
nesting mirrors dotted keys (``loss.theta`` lives at ``{"loss": {"theta": ...}}``).
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from apps.errors import ConfigError
from apps.heatmaps.degradation import DegradationConfig
from apps.heatmaps.heatmap import DEFAULT_HEATMAP_SIGMA, MIN_GRID_SIZE
from apps.losses.jitter import JitterConfig
from apps.metrics.accuracy import DEFAULT_CUTOFF
from apps.metrics.normalization import NormalizationRule
from apps.postprocessing.decode import DecoderConfig
from apps.stabilizer.adam import DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS, DEFAULT_LEARNING_RATE

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "STABLE_ALIGN_THREADS"
DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[1] / "config" / "experiment.json"


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    height: int = Field(32, ge=MIN_GRID_SIZE)
    width: int = Field(32, ge=MIN_GRID_SIZE)


class ModelConfig(BaseModel):
    """Stabiliser architecture."""

    model_config = ConfigDict(extra="forbid")

    hidden_channels: int = Field(16, ge=1)
    kernel_size: int = Field(3, ge=1)

    @model_validator(mode="after")
    def _odd_kernel(self) -> "ModelConfig":
        if self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        return self


class OptimizerConfig(BaseModel):
    """Adam settings and the fine-tuning schedule."""

    model_config = ConfigDict(extra="forbid")

    lr: float = Field(DEFAULT_LEARNING_RATE, gt=0.0)
    beta1: float = Field(DEFAULT_BETA1, gt=0.0, lt=1.0)
    beta2: float = Field(DEFAULT_BETA2, gt=0.0, lt=1.0)
    eps: float = Field(DEFAULT_EPS, gt=0.0)
    epochs: int = Field(30, ge=0)
    sequences_per_epoch: Optional[int] = Field(None, ge=1)


class DatasetConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    train_sequences: int = Field(50, ge=1)
    test_sequences: int = Field(20, ge=1)


class ExperimentConfig(BaseModel):
    """
    Complete description of a synthetic experiment.

    Attributes:
        grid (GridConfig): Heatmap grid size.
        landmarks (int): Landmark count K.
        heatmap_sigma (float): Standard deviation of the synthesised Gaussians.
        shift_range (int): Bound of the per-axis integer shift random walk; 0 gives static faces.
        min_frames (int): Shortest generated sequence.
        max_frames (int): Longest generated sequence.
        degradation (DegradationConfig): Simulated backbone imperfections.
        loss (JitterConfig): Fine-tuning objective.
        decoder (DecoderConfig): Heatmap decoder for training and evaluation.
        model (ModelConfig): Stabiliser architecture.
        optimizer (OptimizerConfig): Adam settings and epochs.
        dataset (DatasetConfig): Train/test sequence counts.
        normalization (NormalizationRule): NME/NRMSE normaliser.
        failure_cutoff (float): FR/AUC cutoff on NME fractions.
        seed (int): Root seed of every random draw.
    """

    model_config = ConfigDict(extra="forbid")

    grid: GridConfig = Field(default_factory=GridConfig)
    landmarks: int = Field(5, ge=1)
    heatmap_sigma: float = Field(DEFAULT_HEATMAP_SIGMA, gt=0.0)
    shift_range: int = Field(2, ge=0)
    min_frames: int = Field(5, ge=2)
    max_frames: int = Field(8, ge=2)
    degradation: DegradationConfig = Field(default_factory=DegradationConfig)
    loss: JitterConfig = Field(default_factory=JitterConfig)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    normalization: NormalizationRule = Field(default_factory=NormalizationRule)
    failure_cutoff: float = Field(DEFAULT_CUTOFF, gt=0.0)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _frame_range(self) -> "ExperimentConfig":
        if self.min_frames > self.max_frames:
            raise ValueError(f"min_frames ({self.min_frames}) exceeds max_frames ({self.max_frames})")
        return self

    def updated(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        """Copy with dotted-key overrides applied and re-validated."""
        raw = self.model_dump(mode="json", by_alias=True)
        apply_overrides(raw, overrides)
        return ExperimentConfig.model_validate(raw)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2, by_alias=True)


class RunConfig(BaseModel):
    """An experiment plus the directory its outputs go to."""

    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)
    out_dir: Path = Path(".")


def apply_overrides(raw: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Set dotted keys (``"loss.theta"``) inside a nested dict, in place.

    Raises:
        ConfigError: If a dotted key runs through a non-mapping value.
    """
    for dotted, value in overrides.items():
        node = raw
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"Cannot override {dotted}: {part} is not a section")
        node[parts[-1]] = value
    return raw


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a JSON or YAML configuration document.

    Raises:
        FileNotFoundError: If the file does not exist.
        ConfigError: On an unsupported suffix or a document that is not a mapping.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        if path.suffix == ".json":
            raw = json.load(f)
        elif path.suffix in (".yaml", ".yml"):
            raw = yaml.safe_load(f) or {}
        else:
            raise ConfigError(f"Unsupported config format {path.suffix!r} for {path}; use .json, .yaml or .yml")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level, got {type(raw).__name__}")
    return raw


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Build an ExperimentConfig from an optional file plus dotted-key overrides.

    Args:
        path (Optional[Union[str, Path]]): JSON/YAML file; defaults only when None.
        overrides (Optional[Mapping[str, Any]]): Values taking precedence over the file.

    Returns:
        ExperimentConfig: The validated configuration.

    Raises:
        pydantic.ValidationError: On unknown keys or out-of-range values.
    """
    raw = read_config_file(path) if path is not None else {}
    apply_overrides(raw, overrides or {})
    config = ExperimentConfig.model_validate(raw)
    logger.debug(f"Loaded configuration from {path or 'defaults'}")
    return config


def evaluation_threads() -> int:
    """Worker count for evaluation, read from ``STABLE_ALIGN_THREADS`` (default 1)."""
    value = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV_VAR} must be a positive integer, got {value!r}")
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV_VAR} must be a positive integer, got {threads}")
    return threads
