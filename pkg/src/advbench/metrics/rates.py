"""Evaluation rates: accuracy, rank-based AUC, fooling ratio, and the report type.

Conventions (also declared in emitted reports): argmax ties break toward the
lowest class index; multi-label accuracy is the mean per-entry binary accuracy
at threshold 0.5; AUC counts tied positive-negative pairs as 0.5.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from ..core.batch import Task
from ..errors import ContractError

MULTILABEL_THRESHOLD = 0.5


def _as_array(x) -> np.ndarray:
    if hasattr(x, "detach"):
        x = x.detach().cpu().numpy()
    return np.asarray(x)


def discrete_predictions(scores, task: Task) -> np.ndarray:
    """Probabilities -> discrete predictions (argmax / 0.5-thresholded vectors)."""
    scores = _as_array(scores)
    if Task(task) is Task.SINGLE_LABEL:
        return scores.argmax(axis=1)
    return (scores >= MULTILABEL_THRESHOLD).astype(np.int64)


def accuracy(preds, labels, task: Task) -> float:
    """Fraction correct; multi-label uses mean per-entry binary accuracy.

    `preds` are probability scores (m, k); labels are indices or 0/1 vectors.
    """
    task = Task(task)
    scores = _as_array(preds)
    y = _as_array(labels.values if hasattr(labels, "values") else labels)
    if scores.shape[0] != y.shape[0]:
        raise ContractError(f"{scores.shape[0]} predictions for {y.shape[0]} labels")
    disc = discrete_predictions(scores, task)
    if task is Task.SINGLE_LABEL:
        return float((disc == y).mean())
    if disc.shape != y.shape:
        raise ContractError(
            f"multi-label shapes differ: {disc.shape} vs {y.shape}"
        )
    return float((disc == y).mean())


def _binary_auc(scores: np.ndarray, positives: np.ndarray) -> float:
    ranks = rankdata(scores)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    pos_rank_sum = float(ranks[positives].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc(scores, labels, task: Task, per_class: bool = False):
    """Rank-based AUC; macro mean across classes for multi-class/multi-label.

    Classes with no positives or no negatives are skipped with a warning and
    excluded from the mean.
    """
    task = Task(task)
    scores = _as_array(scores).astype(np.float64)
    y = _as_array(labels.values if hasattr(labels, "values") else labels)
    if scores.ndim != 2:
        raise ContractError("scores must be an (m, k) matrix")
    if scores.shape[0] != y.shape[0]:
        raise ContractError(f"{scores.shape[0]} scores for {y.shape[0]} labels")
    k = scores.shape[1]
    if task is Task.SINGLE_LABEL and k == 2:
        class_ids = [1]
        positives_for = lambda c: y == c
    elif task is Task.SINGLE_LABEL:
        class_ids = list(range(k))
        positives_for = lambda c: y == c
    else:
        class_ids = list(range(k))
        positives_for = lambda c: y[:, c] == 1
    values = {}
    for c in class_ids:
        pos = positives_for(c)
        if pos.all() or not pos.any():
            warnings.warn(
                f"class {c} is degenerate (all-positive or all-negative); skipped",
                stacklevel=2,
            )
            continue
        values[c] = _binary_auc(scores[:, c], pos)
    if not values:
        raise ContractError("every class is degenerate; AUC undefined")
    mean = float(np.mean(list(values.values())))
    if per_class:
        return mean, values
    return mean


def fooling_ratio(clean_preds, adv_preds, task: Task) -> float:
    """Fraction of images whose discrete prediction changed after perturbation."""
    task = Task(task)
    a = _as_array(clean_preds)
    b = _as_array(adv_preds)
    if a.shape != b.shape:
        raise ContractError(f"prediction shapes differ: {a.shape} vs {b.shape}")
    if task is Task.SINGLE_LABEL:
        return float((a != b).mean())
    return float((a != b).any(axis=1).mean())


@dataclass
class EvaluationReport:
    """ACC/AUC/FR (plus FP/RFP when a benchmark is supplied) with config echo."""

    accuracy: Optional[float] = None
    auc: Optional[float] = None
    fooling_ratio: Optional[float] = None
    per_class: dict = field(default_factory=dict)
    fp: Optional[float] = None
    rfp: Optional[float] = None
    fp_per_type: dict = field(default_factory=dict)
    fp_modes: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    conventions: dict = field(default_factory=lambda: {
        "argmax_ties": "lowest class index",
        "multilabel_accuracy": "mean per-entry binary accuracy at threshold 0.5",
        "auc_ties": "0.5 per tied positive-negative pair",
    })

    def __post_init__(self):
        for name in ("accuracy", "auc", "fooling_ratio", "fp"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {value}")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "auc": self.auc,
            "fooling_ratio": self.fooling_ratio,
            "per_class": self.per_class,
            "fp": self.fp,
            "rfp": self.rfp,
            "fp_per_type": self.fp_per_type,
            "fp_modes": self.fp_modes,
            "config": self.config,
            "counts": self.counts,
            "conventions": self.conventions,
        }
