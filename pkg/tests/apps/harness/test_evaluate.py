"""
Unit tests for baseline and stabilised evaluation.
"""

import logging

import numpy as np
import pytest

from apps.errors import ConfigError, ShapeMismatchError
from apps.harness.config import ExperimentConfig
from apps.harness.evaluate import evaluate, predict_sequence
from apps.harness.finetune import finetune, initial_model
from apps.harness.sequences import TEST_SPLIT, TRAIN_SPLIT, generate_dataset
from apps.postprocessing.decode import make_decoder
from apps.stabilizer.convlstm import ConvLSTMModel


def small_config(**overrides):
    raw = {
        "grid": {"height": 16, "width": 16},
        "landmarks": 2,
        "shift_range": 1,
        "model": {"hidden_channels": 2},
        "optimizer": {"epochs": 1, "lr": 1e-3},
        "dataset": {"train_sequences": 2, "test_sequences": 3},
        "seed": 2,
    }
    return ExperimentConfig.model_validate(raw).updated(overrides)


class TestPredictSequence:
    """Tests for predict_sequence."""

    def test_baseline_decodes_backbone(self):
        config = small_config(**{"degradation.peak_jitter_sigma": 0.0})
        sample = generate_dataset(config, TEST_SPLIT, n_sequences=1)[0]
        points, fallbacks = predict_sequence(None, sample, make_decoder(config.decoder))
        assert points.shape == (sample.n_frames, 2, 2)
        assert fallbacks == 0
        assert np.allclose(points, sample.gt_landmarks, atol=1e-9)


class TestEvaluate:
    """Tests for evaluate."""

    def test_clean_baseline_is_accurate(self):
        config = small_config(**{"degradation.peak_jitter_sigma": 0.0})
        report = evaluate(None, generate_dataset(config, TEST_SPLIT), config, threads=1)
        assert report.nrmse < 0.1
        assert report.n_sequences == 3
        assert report.decode_fallbacks == 0

    def test_untrained_model_equals_baseline(self):
        config = small_config()
        test = generate_dataset(config, TEST_SPLIT)
        assert evaluate(initial_model(config), test, config, threads=1) == evaluate(None, test, config, threads=1)

    def test_threads_do_not_change_result(self):
        config = small_config()
        test = generate_dataset(config, TEST_SPLIT)
        model = finetune(initial_model(config), generate_dataset(config, TRAIN_SPLIT), config).model
        assert evaluate(model, test, config, threads=3) == evaluate(model, test, config, threads=1)

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv("STABLE_ALIGN_THREADS", "2")
        config = small_config()
        test = generate_dataset(config, TEST_SPLIT)
        assert evaluate(None, test, config) == evaluate(None, test, config, threads=1)

    def test_static_jitter_has_dispersion(self):
        config = small_config(shift_range=0)
        report = evaluate(None, generate_dataset(config, TEST_SPLIT), config, threads=1)
        assert report.mcv > 0.0
        assert report.mav > 0.0

    def test_clean_static_has_no_dispersion(self):
        config = small_config(shift_range=0, **{"degradation.peak_jitter_sigma": 0.0})
        report = evaluate(None, generate_dataset(config, TEST_SPLIT), config, threads=1)
        assert report.mcv < 1e-3

    def test_fallbacks_counted(self, caplog):
        config = small_config(**{"decoder.threshold": 0.999})
        with caplog.at_level(logging.WARNING):
            report = evaluate(None, generate_dataset(config, TEST_SPLIT), config, threads=1)
        assert report.decode_fallbacks > 0
        assert "fell back to argmax" in caplog.text

    def test_landmark_count_mismatch(self):
        config = small_config()
        with pytest.raises(ShapeMismatchError):
            evaluate(ConvLSTMModel.initialize(3, hidden_channels=2), generate_dataset(config, TEST_SPLIT), config)

    def test_empty_dataset(self):
        with pytest.raises(ConfigError):
            evaluate(None, [], small_config())
