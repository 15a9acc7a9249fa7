"""
Evaluation of the baseline backbone or a stabiliser on a dataset.
"""

import logging
from multiprocessing.pool import ThreadPool
from typing import Optional, Sequence, Tuple

import numpy as np

from apps.errors import ConfigError, ShapeMismatchError
from apps.metrics.report import MetricsReport, compute_metrics
from apps.postprocessing.base import HeatmapDecoder
from apps.postprocessing.decode import decode_stack_with_fallbacks, make_decoder
from apps.stabilizer.convlstm import ConvLSTMModel, run_sequence
from .config import ExperimentConfig, evaluation_threads
from .sequences import SequenceSample

logger = logging.getLogger(__name__)


def predict_sequence(model: Optional[ConvLSTMModel], sample: SequenceSample,
                     decoder: HeatmapDecoder) -> Tuple[np.ndarray, int]:
    """
    Decoded trajectory of one sequence.

    Without a model the backbone heatmaps are decoded directly.

    Returns:
        Tuple[np.ndarray, int]: ``(T, K, 2)`` landmarks and the decoder fallback count.
    """
    frames = sample.backbone_heatmaps if model is None else run_sequence(model, sample.backbone_heatmaps)
    points = []
    fallbacks = 0
    for frame in frames:
        decoded, n_fallbacks = decode_stack_with_fallbacks(frame, decoder)
        points.append(decoded)
        fallbacks += n_fallbacks
    return np.asarray(points), fallbacks


def evaluate(model: Optional[ConvLSTMModel], dataset: Sequence[SequenceSample], config: ExperimentConfig,
             threads: Optional[int] = None) -> MetricsReport:
    """
    Metrics of the baseline (``model=None``) or of a stabilised pipeline.

    Args:
        model (Optional[ConvLSTMModel]): Stabiliser, or None for the backbone alone.
        dataset (Sequence[SequenceSample]): Evaluation sequences.
        config (ExperimentConfig): Decoder, normaliser and failure cutoff.
        threads (Optional[int]): Worker threads; ``STABLE_ALIGN_THREADS`` when None.

    Returns:
        MetricsReport: Accuracy and stability over the dataset.
    """
    if len(dataset) == 0:
        raise ConfigError("Evaluation needs at least one sequence")
    if model is not None and dataset[0].backbone_heatmaps.shape[1] != model.input_channels:
        raise ShapeMismatchError(
            f"Model expects {model.input_channels} landmarks, data has {dataset[0].backbone_heatmaps.shape[1]}"
        )
    decoder = make_decoder(config.decoder)
    threads = threads or evaluation_threads()

    def work(sample):
        return predict_sequence(model, sample, decoder)

    if threads > 1:
        with ThreadPool(threads) as pool:
            results = pool.map(work, dataset)
    else:
        results = [work(sample) for sample in dataset]

    predictions = [points for points, _ in results]
    fallbacks = sum(n for _, n in results)
    if fallbacks:
        logger.warning(f"{fallbacks} heatmap channels fell back to argmax decoding")
    truths = [sample.gt_landmarks for sample in dataset]
    _, width = dataset[0].grid_shape
    return compute_metrics(predictions, truths, config.normalization, coordinate_offset=float(width),
                           cutoff=config.failure_cutoff, decode_fallbacks=fallbacks)
