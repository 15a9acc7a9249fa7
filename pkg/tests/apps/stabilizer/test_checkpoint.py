"""
Unit tests for .clm checkpoint files.
"""

import numpy as np
import pytest

from apps.errors import FileFormatError
from apps.stabilizer.checkpoint import CLM_MAGIC, load_checkpoint, save_checkpoint
from apps.stabilizer.convlstm import PARAMETER_ORDER, ConvLSTMModel


@pytest.fixture
def model():
    model = ConvLSTMModel.initialize(3, hidden_channels=4, kernel_size=5, seed=7)
    params = dict(model.params)
    params["out_weight"] = np.random.default_rng(7).normal(size=(3, 4))
    model.set_params(params)
    return model


class TestCheckpoint:
    """Tests for save_checkpoint and load_checkpoint."""

    def test_bit_exact(self, tmp_path, model):
        path = tmp_path / "model.clm"
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        assert (loaded.input_channels, loaded.hidden_channels, loaded.kernel_size) == (3, 4, 5)
        for name in PARAMETER_ORDER:
            assert loaded.params[name].tobytes() == model.params[name].tobytes()

    def test_layout(self, tmp_path, model):
        path = tmp_path / "model.clm"
        save_checkpoint(path, model)
        data = path.read_bytes()
        n_params = sum(value.size for value in model.params.values())
        assert data[:4] == CLM_MAGIC
        assert len(data) == 4 + 12 + 8 * n_params

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.clm"
        path.write_bytes(b"XXXX" + bytes(12))
        with pytest.raises(FileFormatError):
            load_checkpoint(path)

    def test_truncated_payload(self, tmp_path, model):
        path = tmp_path / "model.clm"
        save_checkpoint(path, model)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FileFormatError):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "absent.clm")
