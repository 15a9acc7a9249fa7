"""
Unit tests for the loss-surface export.
"""

import csv

import numpy as np
import pytest

from apps.errors import ConfigError
from apps.harness.loss_surface import (
    CURVE_COLUMNS, CURVE_SPAN, SURFACE_COLUMNS, export_loss_curves, export_loss_surface, write_loss_surface_csv,
)
from apps.losses.jitter import JitterConfig


@pytest.fixture
def rows():
    return export_loss_surface(JitterConfig(), grid_resolution=17)


class TestExportLossSurface:
    """Tests for export_loss_surface."""

    def test_size(self, rows):
        assert len(rows) == 17 * 17
        assert rows[0]["e_t"] == -1.0
        assert rows[0]["e_prev"] == -1.0
        assert rows[1]["e_prev"] > rows[0]["e_prev"]

    def test_origin(self, rows):
        origin = [row for row in rows if row["e_t"] == 0.0 and row["e_prev"] == 0.0]
        assert len(origin) == 1
        assert origin[0]["total"] == 0.0

    def test_pixel_term_symmetric(self, rows):
        table = {(row["e_t"], row["e_prev"]): row for row in rows}
        for (e_t, e_prev), row in table.items():
            assert row["pixel_term"] == table[(e_prev, e_t)]["pixel_term"]

    def test_modulated_term_zero_on_diagonal(self, rows):
        assert all(row["modulated_term"] == 0.0 for row in rows if row["e_t"] == row["e_prev"])

    def test_total_is_sum(self, rows):
        for row in rows:
            assert row["total"] == pytest.approx(row["pixel_term"] + row["modulated_term"])

    def test_minimum_resolution(self):
        with pytest.raises(ConfigError):
            export_loss_surface(JitterConfig(), grid_resolution=15)

    def test_csv(self, tmp_path, rows):
        path = tmp_path / "surface.csv"
        write_loss_surface_csv(rows, path)
        with path.open() as f:
            reader = csv.reader(f)
            assert next(reader) == SURFACE_COLUMNS
            assert sum(1 for _ in reader) == len(rows)


class TestExportLossCurves:
    """Tests for export_loss_curves."""

    @pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
    def test_psi_ramps_then_saturates(self, theta):
        rows = export_loss_curves(JitterConfig(theta=theta), resolution=61)
        assert list(rows[0]) == CURVE_COLUMNS
        assert rows[0]["x"] == 0.0
        assert rows[-1]["x"] == pytest.approx(CURVE_SPAN * theta)
        for row in rows:
            assert row["psi"] == pytest.approx(min(row["x"], theta), abs=1e-12)

    def test_gm_gradient_peaks_at_theta_over_root_three(self):
        theta = 1.5
        rows = export_loss_curves(JitterConfig(theta=theta), resolution=301)
        x = np.array([row["x"] for row in rows])
        grads = np.array([row["gm_grad"] for row in rows])
        step = x[1] - x[0]
        assert abs(x[np.argmax(grads)] - theta / np.sqrt(3.0)) <= step
        assert rows[0]["gm_loss"] == 0.0
        assert all(b["gm_loss"] > a["gm_loss"] for a, b in zip(rows, rows[1:]))

    def test_psi_independent_of_xi(self):
        first = export_loss_curves(JitterConfig(xi=0.01), resolution=31)
        second = export_loss_curves(JitterConfig(xi=2.0), resolution=31)
        for a, b in zip(first, second):
            assert a["psi"] == pytest.approx(b["psi"], abs=1e-12)

    def test_minimum_resolution(self):
        with pytest.raises(ConfigError):
            export_loss_curves(JitterConfig(), resolution=15)

    def test_csv(self, tmp_path):
        rows = export_loss_curves(JitterConfig(), resolution=16)
        path = tmp_path / "curves.csv"
        write_loss_surface_csv(rows, path, CURVE_COLUMNS)
        with path.open() as f:
            reader = csv.reader(f)
            assert next(reader) == CURVE_COLUMNS
            assert sum(1 for _ in reader) == 16

    def test_reference_gradients(self):
        rows = export_loss_curves(JitterConfig(), resolution=31)
        for row in rows:
            assert row["l2_grad"] == pytest.approx(2.0 * row["x"], abs=1e-12)
        assert rows[0]["awing_grad"] == 0.0
        assert all(row["awing_grad"] > 0.0 for row in rows[1:])
