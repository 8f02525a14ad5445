"""Result containers shared by the classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ClassificationResult:
    """Decision for one test sample.

    Attributes:
        label: Predicted class id (1-based); 0 marks a rejected confuser.
        residuals: Per-class scores; the smallest one wins.
        confuser: True when the sample was rejected as a confuser.
        low_confidence: True when the sparse code was identically zero.
    """

    label: int
    residuals: np.ndarray
    confuser: bool = False
    low_confidence: bool = False
