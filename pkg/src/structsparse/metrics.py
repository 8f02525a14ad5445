"""Classification metrics and ROC sweeps.

Metrics JSON layout (``MetricsReport.to_json``)::

    {
      "accuracy": float,            # fraction of correct predictions
      "n_samples": int,
      "classes": [int, ...],        # row/column order of the confusion matrix
      "confusion": [[int, ...]],    # confusion[i][j]: true classes[i] predicted classes[j]
      "roc": [{"param": float, "miss": float, "false_alarm": float}, ...]   # optional
    }

ROC points treat the diseased (target) class as positive: ``miss`` is the
fraction of positives called negative, ``false_alarm`` the fraction of
negatives called positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dfdl import mvp_detect


@dataclass
class RocPoint:
    param: float
    miss: float
    false_alarm: float


@dataclass
class MetricsReport:
    accuracy: float
    confusion: np.ndarray
    classes: np.ndarray
    roc: list[RocPoint] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": float(self.accuracy),
            "n_samples": int(self.confusion.sum()),
            "classes": [int(c) for c in self.classes],
            "confusion": self.confusion.astype(int).tolist(),
            "roc": [{"param": p.param, "miss": p.miss, "false_alarm": p.false_alarm} for p in self.roc],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def evaluate(pred, true, classes=None) -> MetricsReport:
    """Accuracy and confusion matrix (rows: true class, columns: predicted)."""
    pred = np.asarray(pred).ravel()
    true = np.asarray(true).ravel()
    if pred.shape != true.shape:
        raise ValueError("prediction and label counts differ")
    if true.size == 0:
        raise ValueError("no samples to evaluate")
    if classes is None:
        classes = np.union1d(true, pred)
    classes = np.asarray(classes)
    index = {c: i for i, c in enumerate(classes.tolist())}
    try:
        ti = np.array([index[v] for v in true.tolist()])
        pi = np.array([index[v] for v in pred.tolist()])
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]} is not among the declared classes") from None
    conf = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(conf, (ti, pi), 1)
    return MetricsReport(float(np.mean(pred == true)), conf, classes)


def _rates(detected: np.ndarray, positive: np.ndarray) -> tuple[float, float]:
    pos, neg = positive.sum(), (~positive).sum()
    miss = float(np.sum(~detected & positive) / pos) if pos else 0.0
    fa = float(np.sum(detected & ~positive) / neg) if neg else 0.0
    return miss, fa


def roc_sweep(kind: str, values: Sequence[float], samples, positives) -> list[RocPoint]:
    """Miss and false-alarm rates over a decision parameter.

    Args:
        kind: ``"theta"``: ``samples`` are healthy-patch fractions and an
            image is called healthy iff its fraction is at least ``theta``.
            ``"m_connect"``: ``samples`` are boolean patch grids and an image
            is called positive iff a 4-connected positive region has at
            least ``m`` cells.
        values: Parameter values to sweep.
        samples: One entry per image.
        positives: True for diseased / target images.
    """
    values = list(values)
    if not values:
        raise ValueError("parameter range is empty")
    positive = np.asarray(positives, dtype=bool)
    if len(samples) != positive.size:
        raise ValueError("one positive flag per sample is required")
    out = []
    if kind == "theta":
        fr = np.asarray(samples, dtype=float)
        for t in values:
            miss, fa = _rates(fr < t, positive)
            out.append(RocPoint(float(t), miss, fa))
    elif kind == "m_connect":
        grids = [np.asarray(g, dtype=bool) for g in samples]
        for m in values:
            if m < 1:
                raise ValueError("m must be at least 1")
            det = np.array([mvp_detect(g, int(m)) for g in grids])
            miss, fa = _rates(det, positive)
            out.append(RocPoint(float(m), miss, fa))
    else:
        raise ValueError(f"unknown sweep kind {kind!r}")
    return out
