"""
Fine-tuning of the stabiliser on a list of sequences.

The backbone stays fixed: only the ConvLSTM parameters are trained. Each
sequence starts from a zero state, frame 1 contributes the lambda-weighted
pixel loss and every later frame the jitter loss against its predecessor.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from apps.errors import ConfigError, NumericalFailureError
from apps.losses.jitter import first_frame_loss, jitter_loss
from apps.postprocessing.base import HeatmapDecoder
from apps.postprocessing.decode import decode_stack, make_decoder
from apps.stabilizer.adam import AdamState, adam_step
from apps.stabilizer.convlstm import ConvLSTMModel, backward_sequence, forward_sequence
from .config import ExperimentConfig
from .sequences import SequenceSample

logger = logging.getLogger(__name__)


@dataclass
class FinetuneResult:
    """Trained model, mean loss per epoch and the final optimizer state."""

    model: ConvLSTMModel
    history: List[float] = field(default_factory=list)
    adam: Optional[AdamState] = None

    @property
    def final_loss(self) -> Optional[float]:
        return self.history[-1] if self.history else None


def initial_model(config: ExperimentConfig) -> ConvLSTMModel:
    """Identity-initialised stabiliser for ``config``."""
    return ConvLSTMModel.initialize(config.landmarks, config.model.hidden_channels,
                                    config.model.kernel_size, seed=config.seed)


def sequence_loss(model: ConvLSTMModel, sample: SequenceSample, config: ExperimentConfig,
                  decoder: HeatmapDecoder) -> Tuple[float, np.ndarray, list]:
    """
    Forward one sequence and return its mean frame loss.

    Returns:
        Tuple[float, np.ndarray, list]: loss value, dL/ds_t for every frame and
        the forward caches. The value may be non-finite; callers check it.
    """
    outputs, caches = forward_sequence(model, sample.backbone_heatmaps)
    n_frames = len(outputs)
    grad_outputs = np.zeros_like(outputs)
    if not np.all(np.isfinite(outputs)):
        return float("nan"), grad_outputs, caches

    decoded = [decode_stack(frame, decoder) for frame in outputs]
    total = 0.0
    for t in range(n_frames):
        if t == 0:
            term = first_frame_loss(outputs[0], sample.gt_heatmaps[0], config.loss)
        else:
            term = jitter_loss(outputs[t], sample.gt_heatmaps[t], decoded[t], sample.gt_landmarks[t],
                               decoded[t - 1], sample.gt_landmarks[t - 1], config.loss)
        total += term.value
        grad_outputs[t] = term.grad / n_frames
    return total / n_frames, grad_outputs, caches


def epoch_order(n_sequences: int, config: ExperimentConfig, epoch: int) -> np.ndarray:
    """Sequence indices visited in ``epoch``: all in order, or a seeded subset."""
    per_epoch = config.optimizer.sequences_per_epoch
    if per_epoch is None or per_epoch >= n_sequences:
        return np.arange(n_sequences)
    rng = np.random.default_rng([config.seed, epoch])
    return np.sort(rng.choice(n_sequences, size=per_epoch, replace=False))


def finetune(model: ConvLSTMModel, dataset: Sequence[SequenceSample], config: ExperimentConfig) -> FinetuneResult:
    """
    Train a copy of ``model`` with Adam, one update per sequence.

    Args:
        model (ConvLSTMModel): Starting point; left unchanged.
        dataset (Sequence[SequenceSample]): Training sequences.
        config (ExperimentConfig): Loss, decoder and optimizer settings.

    Returns:
        FinetuneResult: Trained model and per-epoch mean loss.

    Raises:
        ConfigError: On an empty dataset.
        NumericalFailureError: If a sequence loss is not finite.
    """
    if len(dataset) == 0:
        raise ConfigError("Fine-tuning needs at least one sequence")
    model = model.copy()
    decoder = make_decoder(config.decoder)
    opt = config.optimizer
    adam = AdamState.for_params(model.params, lr=opt.lr, beta1=opt.beta1, beta2=opt.beta2, eps=opt.eps)
    history = []

    for epoch in range(opt.epochs):
        losses = []
        for index in epoch_order(len(dataset), config, epoch):
            sample = dataset[index]
            value, grad_outputs, caches = sequence_loss(model, sample, config, decoder)
            if not np.isfinite(value):
                raise NumericalFailureError(
                    f"Non-finite loss on sequence {index} (seed {sample.seed}) in epoch {epoch + 1}"
                )
            grads = backward_sequence(caches, grad_outputs)
            new_params, adam = adam_step(model.params, grads, adam)
            model.set_params(new_params)
            losses.append(value)
            logger.debug(f"Epoch {epoch + 1} sequence {index}: loss {value:.6g}")
        history.append(float(np.mean(losses)))
        logger.info(f"Epoch {epoch + 1}/{opt.epochs}: mean loss {history[-1]:.6g}")

    return FinetuneResult(model=model, history=history, adam=adam)


def write_history_csv(path: Union[str, Path], history: Sequence[float]) -> None:
    """Write the per-epoch loss history as ``epoch,loss`` rows."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss"])
        for epoch, value in enumerate(history, start=1):
            writer.writerow([epoch, repr(float(value))])
