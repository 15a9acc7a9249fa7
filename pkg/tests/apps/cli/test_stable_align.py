"""
Unit tests for the stable_align command-line front end.
"""

import json

import numpy as np
import pytest

from apps.cli.stable_align import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, build_parser, config_overrides, main
from apps.errors import NumericalFailureError
from apps.harness.config import load_config
from apps.harness.finetune import initial_model
from apps.stabilizer.checkpoint import load_checkpoint
from apps.stabilizer.convlstm import PARAMETER_ORDER

SMALL_CONFIG = {
    "grid": {"height": 16, "width": 16},
    "landmarks": 2,
    "shift_range": 1,
    "min_frames": 3,
    "max_frames": 4,
    "model": {"hidden_channels": 2},
    "optimizer": {"epochs": 1, "lr": 0.001},
    "dataset": {"train_sequences": 2, "test_sequences": 2},
    "seed": 4,
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL_CONFIG))
    return path


@pytest.fixture
def data_dir(tmp_path, config_path):
    out = tmp_path / "data"
    assert main(["synth", "-c", str(config_path), "-o", str(out)]) == EXIT_OK
    return out


class TestParser:
    """Tests for flag parsing and overrides."""

    def test_only_passed_flags_override(self):
        args = build_parser().parse_args(["synth", "-o", "x", "--theta", "1.5", "--lambda", "0.5"])
        assert config_overrides(args) == {"loss.theta": 1.5, "loss.lambda": 0.5}

    def test_theta_pdc_flag(self):
        args = build_parser().parse_args(["synth", "-o", "x", "--theta-pdc", "0.4", "--decoder", "pdc"])
        assert config_overrides(args) == {"decoder.kind": "pdc", "decoder.threshold": 0.4}

    def test_help_lists_defaults(self, capsys, monkeypatch):
        monkeypatch.setenv("COLUMNS", "200")
        with pytest.raises(SystemExit) as excinfo:
            main(["finetune", "--help"])
        assert excinfo.value.code == 0
        text = capsys.readouterr().out
        for flag in ("--loss", "--decoder", "--theta", "--theta-pdc", "--lambda", "--xi", "--lr", "--epochs",
                     "--seed"):
            assert flag in text
        assert "default: 1.0" in text
        assert "default: 0.2" in text
        assert "default: 0.0001" in text

    def test_sweep_help_lists_columns(self, capsys):
        with pytest.raises(SystemExit):
            main(["sweep", "--help"])
        assert "nrmse_x_mcv" in capsys.readouterr().out

    def test_unknown_sweep_kind(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["sweep", "lambda"])
        assert excinfo.value.code == EXIT_VALIDATION

    def test_eval_needs_model_or_baseline(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["eval", "--data", str(tmp_path)])
        assert excinfo.value.code == EXIT_VALIDATION


class TestSynth:
    """Tests for the synth command."""

    def test_manifest(self, tmp_path, config_path, capsys):
        out = tmp_path / "data"
        assert main(["synth", "-c", str(config_path), "-o", str(out)]) == EXIT_OK
        printed = json.loads(capsys.readouterr().out)
        assert printed["sequences"] == 4
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["sequences"]) == 4

    def test_rerun_is_byte_identical(self, tmp_path, config_path):
        for name in ("a", "b"):
            assert main(["synth", "-c", str(config_path), "-o", str(tmp_path / name)]) == EXIT_OK
        for path in (tmp_path / "a").iterdir():
            assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()

    def test_negative_sigma(self, tmp_path, caplog):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"degradation": {"noise_sigma": -1.0}}))
        assert main(["synth", "-c", str(path), "-o", str(tmp_path / "data")]) == EXIT_VALIDATION
        assert "noise_sigma" in caplog.text

    def test_missing_config(self, tmp_path):
        assert main(["synth", "-c", str(tmp_path / "absent.json"), "-o", str(tmp_path / "d")]) == EXIT_VALIDATION


class TestFinetuneAndEval:
    """Tests for the finetune and eval commands."""

    def test_zero_epochs_write_identity(self, tmp_path, config_path, data_dir, capsys):
        out = tmp_path / "model.clm"
        assert main(["finetune", "-c", str(config_path), "--data", str(data_dir), "-o", str(out),
                     "--epochs", "0"]) == EXIT_OK
        printed = json.loads(capsys.readouterr().out)
        assert printed["final_loss"] is None
        model = load_checkpoint(out)
        identity = initial_model(load_config(config_path))
        for name in PARAMETER_ORDER:
            assert np.array_equal(model.params[name], identity.params[name])
        assert (tmp_path / "model_history.csv").read_text().strip() == "epoch,loss"

    def test_loss_kinds_give_different_checkpoints(self, tmp_path, config_path, data_dir):
        paths = {}
        for loss in ("jitter", "l2"):
            paths[loss] = tmp_path / f"{loss}.clm"
            assert main(["finetune", "-c", str(config_path), "--data", str(data_dir), "-o", str(paths[loss]),
                         "--loss", loss]) == EXIT_OK
        assert paths["jitter"].read_bytes() != paths["l2"].read_bytes()

    def test_identity_checkpoint_equals_baseline(self, tmp_path, config_path, data_dir, capsys):
        model_path = tmp_path / "identity.clm"
        main(["finetune", "-c", str(config_path), "--data", str(data_dir), "-o", str(model_path), "--epochs", "0"])
        capsys.readouterr()
        assert main(["eval", "-c", str(config_path), "--data", str(data_dir), "--baseline"]) == EXIT_OK
        baseline = capsys.readouterr().out
        assert main(["eval", "-c", str(config_path), "--data", str(data_dir), "--model", str(model_path),
                     "-o", str(tmp_path / "results")]) == EXIT_OK
        assert capsys.readouterr().out == baseline
        assert (tmp_path / "results" / "metrics.json").exists()
        assert (tmp_path / "results" / "metrics.csv").exists()

    def test_missing_model(self, tmp_path, config_path, data_dir):
        assert main(["eval", "-c", str(config_path), "--data", str(data_dir),
                     "--model", str(tmp_path / "absent.clm")]) == EXIT_VALIDATION

    def test_model_data_mismatch(self, tmp_path, config_path, data_dir):
        other = tmp_path / "other.json"
        other.write_text(json.dumps(dict(SMALL_CONFIG, landmarks=3)))
        model_path = tmp_path / "k3.clm"
        other_data = tmp_path / "k3data"
        assert main(["synth", "-c", str(other), "-o", str(other_data)]) == EXIT_OK
        assert main(["finetune", "-c", str(other), "--data", str(other_data), "-o", str(model_path),
                     "--epochs", "0"]) == EXIT_OK
        assert main(["eval", "-c", str(config_path), "--data", str(data_dir),
                     "--model", str(model_path)]) == EXIT_VALIDATION

    def test_numerical_failure_exit_code(self, tmp_path, config_path, data_dir, monkeypatch):
        def explode(*args, **kwargs):
            raise NumericalFailureError("Non-finite loss on sequence 0 (seed 1) in epoch 1")

        monkeypatch.setattr("apps.cli.stable_align.finetune", explode)
        assert main(["finetune", "-c", str(config_path), "--data", str(data_dir),
                     "-o", str(tmp_path / "m.clm")]) == EXIT_NUMERICAL


class TestSweepSurfaceVerify:
    """Tests for the sweep, surface and verify commands."""

    def test_theta_sweep_csv(self, tmp_path, config_path, capsys):
        out = tmp_path / "theta.csv"
        assert main(["sweep", "theta", "-c", str(config_path), "--values", "0", "1", "2", "-o", str(out)]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "theta,nrmse,mcv,mav,nrmse_x_mcv"
        assert len(lines) == 4
        assert out.read_text().splitlines()[0] == lines[0]

    def test_losses_sweep_csv(self, tmp_path, config_path, capsys):
        grid_db = tmp_path / "grids.yaml"
        grid_db.write_text("- sweep:\n    kind: losses\n    losses: [l2, jitter]\n    decoders: [argmax, pdc]\n")
        assert main(["sweep", "losses", "-c", str(config_path), "--grid-db", str(grid_db)]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "loss,decoder,nme,fr,mcv,mav"
        assert [line.split(",")[:2] for line in lines[1:]] == [
            ["l2", "argmax"], ["l2", "pdc"], ["jitter", "argmax"], ["jitter", "pdc"],
        ]

    def test_surface(self, config_path, capsys):
        assert main(["surface", "-c", str(config_path), "--resolution", "16"]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "e_t,e_prev,pixel_term,modulated_term,total"
        assert len(lines) == 1 + 16 * 16

    def test_surface_curves(self, tmp_path, config_path, capsys):
        out = tmp_path / "curves.csv"
        assert main(["surface", "-c", str(config_path), "--curves", "--resolution", "31", "-o", str(out)]) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "x,psi,gm_loss,gm_grad,l2_grad,awing_grad"
        assert len(lines) == 32
        assert out.read_text().splitlines() == lines

    def test_surface_resolution_too_low(self, config_path):
        assert main(["surface", "-c", str(config_path), "--resolution", "8"]) == EXIT_VALIDATION

    def test_verify(self, tmp_path, capsys):
        out = tmp_path / "oracle.json"
        assert main(["verify", "--cases", "100", "-o", str(out)]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["n_cases"] == 100
        assert report["max_abs_discrepancy"] <= 1e-9
        assert json.loads(out.read_text()) == report
