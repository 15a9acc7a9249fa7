"""
Face-scale normalisers for landmark errors.
"""

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from apps.errors import MetricDomainError


class NormalizationKind(str, Enum):
    INTER_OCULAR = "inter_ocular"
    BOX_DIAGONAL = "box_diagonal"
    FIXED = "fixed"


class NormalizationRule(BaseModel):
    """
    How the normaliser of a frame is obtained.

    ``inter_ocular`` measures the ground-truth distance between the two eye
    landmarks, ``box_diagonal`` uses the diagonal of a ``width x height`` face
    box and ``fixed`` uses ``value`` directly.
    """

    model_config = ConfigDict(extra="forbid")

    kind: NormalizationKind = NormalizationKind.INTER_OCULAR
    left_eye_index: int = Field(0, ge=0)
    right_eye_index: int = Field(1, ge=0)
    width: float = Field(1.0, ge=0.0)
    height: float = Field(1.0, ge=0.0)
    value: float = Field(1.0, ge=0.0)

    @classmethod
    def inter_ocular(cls, left_eye_index: int = 0, right_eye_index: int = 1) -> "NormalizationRule":
        return cls(kind=NormalizationKind.INTER_OCULAR, left_eye_index=left_eye_index,
                   right_eye_index=right_eye_index)

    @classmethod
    def box_diagonal(cls, width: float, height: float) -> "NormalizationRule":
        return cls(kind=NormalizationKind.BOX_DIAGONAL, width=width, height=height)

    @classmethod
    def fixed(cls, value: float) -> "NormalizationRule":
        return cls(kind=NormalizationKind.FIXED, value=value)

    def normalizer(self, truth: np.ndarray) -> float:
        """
        Normaliser for one frame.

        Args:
            truth (np.ndarray): ``(K, 2)`` ground-truth landmarks of the frame.

        Raises:
            MetricDomainError: If the normaliser is not positive or an eye index is out of range.
        """
        if self.kind is NormalizationKind.INTER_OCULAR:
            n_landmarks = np.shape(truth)[0]
            if max(self.left_eye_index, self.right_eye_index) >= n_landmarks:
                raise MetricDomainError(
                    f"Eye indices ({self.left_eye_index}, {self.right_eye_index}) out of range for {n_landmarks} landmarks"
                )
            value = float(np.linalg.norm(truth[self.left_eye_index] - truth[self.right_eye_index]))
        elif self.kind is NormalizationKind.BOX_DIAGONAL:
            value = float(np.hypot(self.width, self.height))
        else:
            value = float(self.value)
        if not value > 0:
            raise MetricDomainError(f"Normaliser must be positive, got {value} ({self.kind.value})")
        return value
