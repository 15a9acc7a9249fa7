"""
Hyperparameter sweeps and the noise/blur robustness protocol.

Every sweep trains on one seeded dataset and evaluates on one seeded test
set, so rows differ only by the swept value. Results are lists of flat
dicts, written as CSV and logged as a table.
"""

import csv
import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import yaml
from tabulate import tabulate

from apps.errors import ConfigError
from apps.losses.jitter import LossKind
from apps.postprocessing.decode import DecoderKind
from .config import ExperimentConfig
from .evaluate import evaluate
from .finetune import finetune, initial_model
from .sequences import TEST_SPLIT, TRAIN_SPLIT, generate_dataset

logger = logging.getLogger(__name__)

DEFAULT_GRID_DB = Path(__file__).resolve().parents[2] / "sweep_grids.yaml"
# Theta actually trained for a nominal 0.
THETA_FLOOR = 1e-3
MIN_SWEEP_VALUES = 3
MIN_ROBUSTNESS_LEVELS = 2

THETA_COLUMNS = ["theta", "nrmse", "mcv", "mav", "nrmse_x_mcv"]
THETA_PDC_COLUMNS = ["theta_pdc", "nrmse", "mav", "nrmse_x_mav"]
ROBUSTNESS_COLUMNS = ["noise_sigma", "blur_sigma", "method", "nrmse", "mcv", "mav"]
LOSSES_COLUMNS = ["loss", "decoder", "nme", "fr", "mcv", "mav"]


class SweepKind(str, Enum):
    THETA = "theta"
    THETA_PDC = "theta_pdc"
    ROBUSTNESS = "robustness"
    LOSSES = "losses"


SWEEP_COLUMNS = {
    SweepKind.THETA: THETA_COLUMNS,
    SweepKind.THETA_PDC: THETA_PDC_COLUMNS,
    SweepKind.ROBUSTNESS: ROBUSTNESS_COLUMNS,
    SweepKind.LOSSES: LOSSES_COLUMNS,
}


class SweepGridDB:
    """Default sweep grids read from a YAML database."""

    def __init__(self, db_path: Union[str, Path] = DEFAULT_GRID_DB):
        """
        Args:
            db_path (Union[str, Path]): Path to the sweep grid YAML file.
        """
        self.db_path = Path(db_path)
        self.db_data = self._load_db()

    def _load_db(self) -> List[Dict]:
        with self.db_path.open("r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or []
        if not isinstance(data, list):
            raise ConfigError(f"{self.db_path} must hold a list of sweep entries")
        return data

    def get_sweep(self, kind: Union[str, SweepKind]) -> Dict:
        """
        Entry of one sweep kind.

        Raises:
            ConfigError: If the database has no entry for ``kind``.
        """
        kind = SweepKind(kind)
        for entry in self.db_data:
            if entry["sweep"]["kind"] == kind.value:
                return entry["sweep"]
        raise ConfigError(f"No {kind.value} sweep defined in {self.db_path}")

    def get_values(self, kind: Union[str, SweepKind]) -> List[float]:
        return [float(v) for v in self.get_sweep(kind)["values"]]

    def get_robustness_levels(self) -> Dict[str, List[float]]:
        entry = self.get_sweep(SweepKind.ROBUSTNESS)
        return {
            "noise_levels": [float(v) for v in entry["noise_levels"]],
            "blur_levels": [float(v) for v in entry["blur_levels"]],
        }

    def get_loss_grid(self) -> Dict[str, List[str]]:
        entry = self.get_sweep(SweepKind.LOSSES)
        return {
            "losses": [str(v) for v in entry["losses"]],
            "decoders": [str(v) for v in entry["decoders"]],
        }


def _require_values(values: Sequence[float], minimum: int, name: str) -> None:
    if len(values) < minimum:
        raise ConfigError(f"{name} needs at least {minimum} values, got {len(values)}")


def _train_and_evaluate(config: ExperimentConfig, train, test):
    result = finetune(initial_model(config), train, config)
    return evaluate(result.model, test, config)


def sweep_theta(values: Sequence[float], config: ExperimentConfig) -> List[Dict]:
    """
    Fine-tune and evaluate once per theta on a fixed dataset.

    A theta of 0 is trained at ``THETA_FLOOR`` and reported as 0.

    Returns:
        List[Dict]: Rows with ``THETA_COLUMNS``.
    """
    _require_values(values, MIN_SWEEP_VALUES, "Theta sweep")
    train = generate_dataset(config, TRAIN_SPLIT)
    test = generate_dataset(config, TEST_SPLIT)
    rows = []
    for theta in values:
        run_config = config.updated({"loss.theta": max(float(theta), THETA_FLOOR)})
        report = _train_and_evaluate(run_config, train, test)
        rows.append({
            "theta": float(theta),
            "nrmse": report.nrmse,
            "mcv": report.mcv,
            "mav": report.mav,
            "nrmse_x_mcv": report.nrmse * report.mcv,
        })
        logger.info(f"Theta {theta}: NRMSE {report.nrmse:.4f}, MCV {report.mcv:.4g}")
    return rows


def sweep_theta_pdc(values: Sequence[float], config: ExperimentConfig) -> List[Dict]:
    """
    Fine-tune and evaluate once per PDC threshold on a fixed dataset.

    The threshold is used both for the decoded landmarks inside the loss and
    for evaluation.

    Returns:
        List[Dict]: Rows with ``THETA_PDC_COLUMNS``.
    """
    _require_values(values, MIN_SWEEP_VALUES, "Theta_PDC sweep")
    train = generate_dataset(config, TRAIN_SPLIT)
    test = generate_dataset(config, TEST_SPLIT)
    rows = []
    for threshold in values:
        run_config = config.updated({"decoder.kind": DecoderKind.PDC.value, "decoder.threshold": float(threshold)})
        report = _train_and_evaluate(run_config, train, test)
        rows.append({
            "theta_pdc": float(threshold),
            "nrmse": report.nrmse,
            "mav": report.mav,
            "nrmse_x_mav": report.nrmse * report.mav,
        })
        logger.info(f"Theta_PDC {threshold}: NRMSE {report.nrmse:.4f}, MAV {report.mav:.4g}")
    return rows


def robustness_sweep(noise_levels: Sequence[float], blur_levels: Sequence[float],
                     config: ExperimentConfig, finetune_model: bool = True) -> List[Dict]:
    """
    Stability of baseline and fine-tuned pipelines under added noise and blur.

    Sequences are static (no shift). The stabiliser is fine-tuned once on the
    configured training degradation; each (noise, blur) level then gets its
    own jitter-free test set, so the clean level has zero baseline dispersion
    and every other level measures the added degradation alone. Test sets of
    all levels share one random stream, so their noise fields differ only in
    scale. Noise levels well below the PDC threshold keep the background
    suppressed; above it, surviving background pixels drag every centroid
    toward the grid centre.

    Args:
        noise_levels (Sequence[float]): Pixel noise standard deviations.
        blur_levels (Sequence[float]): Blur standard deviations.
        config (ExperimentConfig): Base experiment.
        finetune_model (bool): Also evaluate a fine-tuned stabiliser.

    Returns:
        List[Dict]: One row per level and method, ``ROBUSTNESS_COLUMNS``.
    """
    _require_values(noise_levels, MIN_ROBUSTNESS_LEVELS, "Noise axis")
    _require_values(blur_levels, MIN_ROBUSTNESS_LEVELS, "Blur axis")
    static = config.updated({"shift_range": 0})
    methods = {"baseline": None}
    if finetune_model:
        methods["finetuned"] = finetune(initial_model(static), generate_dataset(static, TRAIN_SPLIT), static).model

    rows = []
    for noise in noise_levels:
        for blur in blur_levels:
            level = static.updated({
                "degradation.noise_sigma": float(noise),
                "degradation.blur_sigma": float(blur),
                "degradation.peak_jitter_sigma": 0.0,
            })
            test = generate_dataset(level, TEST_SPLIT)
            for method, model in methods.items():
                report = evaluate(model, test, level)
                rows.append({
                    "noise_sigma": float(noise),
                    "blur_sigma": float(blur),
                    "method": method,
                    "nrmse": report.nrmse,
                    "mcv": report.mcv,
                    "mav": report.mav,
                })
            logger.info(f"Robustness level noise={noise} blur={blur} done")
    return rows


def sweep_losses(losses: Sequence[Union[str, LossKind]], decoders: Sequence[Union[str, DecoderKind]],
                 config: ExperimentConfig) -> List[Dict]:
    """
    Fine-tune once per (loss, decoder) pair on a fixed dataset.

    The decoder is used both inside the jitter modulation and for evaluation,
    so each row compares complete pipelines.

    Returns:
        List[Dict]: Rows with ``LOSSES_COLUMNS``, decoders varying fastest.

    Raises:
        ConfigError: On an empty loss or decoder list.
        ValueError: On an unknown loss or decoder name.
    """
    losses = [LossKind(loss) for loss in losses]
    decoders = [DecoderKind(decoder) for decoder in decoders]
    _require_values(losses, 1, "Loss axis")
    _require_values(decoders, 1, "Decoder axis")
    train = generate_dataset(config, TRAIN_SPLIT)
    test = generate_dataset(config, TEST_SPLIT)
    rows = []
    for loss in losses:
        for decoder in decoders:
            run_config = config.updated({"loss.kind": loss.value, "decoder.kind": decoder.value})
            report = _train_and_evaluate(run_config, train, test)
            rows.append({
                "loss": loss.value,
                "decoder": decoder.value,
                "nme": report.nme,
                "fr": report.fr,
                "mcv": report.mcv,
                "mav": report.mav,
            })
            logger.info(f"Loss {loss.value} with {decoder.value}: NME {report.nme:.4f}, MCV {report.mcv:.4g}")
    return rows


def write_sweep_csv(rows: Sequence[Dict], path: Union[str, Path], columns: Optional[Sequence[str]] = None) -> None:
    """Write sweep rows as CSV, columns in the given (or first-row) order."""
    columns = list(columns or rows[0].keys())
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    logger.info(f"Sweep table written to {path}")


def format_sweep_table(rows: Sequence[Dict]) -> str:
    return tabulate([list(row.values()) for row in rows], headers=list(rows[0].keys()), tablefmt="simple")
