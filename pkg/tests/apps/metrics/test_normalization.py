"""
Unit tests for NormalizationRule.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from apps.errors import MetricDomainError
from apps.metrics.normalization import NormalizationKind, NormalizationRule


class TestNormalizationRule:
    """Tests for the three normaliser kinds."""

    def test_inter_ocular(self):
        truth = np.array([[3.0, 4.0], [6.0, 8.0], [5.0, 9.0]])
        assert NormalizationRule.inter_ocular().normalizer(truth) == pytest.approx(5.0)

    def test_custom_eye_indices(self):
        truth = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        assert NormalizationRule.inter_ocular(0, 2).normalizer(truth) == 2.0

    def test_box_diagonal(self):
        assert NormalizationRule.box_diagonal(30.0, 40.0).normalizer(np.zeros((1, 2))) == 50.0

    def test_fixed(self):
        rule = NormalizationRule.fixed(100.0)
        assert rule.kind is NormalizationKind.FIXED
        assert rule.normalizer(np.zeros((1, 2))) == 100.0

    def test_eye_index_out_of_range(self):
        with pytest.raises(MetricDomainError):
            NormalizationRule.inter_ocular(0, 3).normalizer(np.ones((3, 2)))

    @pytest.mark.parametrize("rule", [NormalizationRule.fixed(0.0), NormalizationRule.box_diagonal(0.0, 0.0)])
    def test_zero_normaliser(self, rule):
        with pytest.raises(MetricDomainError):
            rule.normalizer(np.zeros((2, 2)))

    def test_rejects_unknown_key(self):
        with pytest.raises(ValidationError):
            NormalizationRule.model_validate({"kind": "fixed", "scale": 2.0})

    def test_from_json_section(self):
        rule = NormalizationRule.model_validate({"kind": "box_diagonal", "width": 6.0, "height": 8.0})
        assert rule.normalizer(np.zeros((1, 2))) == 10.0
