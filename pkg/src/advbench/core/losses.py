"""Loss primitives: cross-entropy variants, one-hot encoding, KL divergence.

All log computations clamp probabilities at PROB_FLOOR so losses stay finite
even at saturated outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import torch
import torch.nn.functional as F

from ..errors import ContractError, TaskMismatchError
from .batch import DTYPE, LabelBatch, Task

PROB_FLOOR = 1e-12
_LOG_FLOOR = math.log(PROB_FLOOR)


class LossKind(str, Enum):
    CROSS_ENTROPY = "cross-entropy"
    BCE_PER_CLASS = "bce-per-class"
    NEG_LOG_TRUE_CLASS = "neg-log-true-class"


@dataclass(frozen=True)
class LossSpec:
    """Loss selector; reduction is always the mean over the batch."""

    kind: LossKind = LossKind.CROSS_ENTROPY

    def compatible_with(self, task: Task) -> bool:
        if self.kind is LossKind.BCE_PER_CLASS:
            return task is Task.MULTI_LABEL
        return task is Task.SINGLE_LABEL


def default_loss(task: Task) -> LossSpec:
    if Task(task) is Task.MULTI_LABEL:
        return LossSpec(LossKind.BCE_PER_CLASS)
    return LossSpec(LossKind.CROSS_ENTROPY)


def one_hot(y: LabelBatch) -> torch.Tensor:
    """One-hot encode single-label classes into an (m, k) 0/1 matrix."""
    if y.task is not Task.SINGLE_LABEL:
        raise TaskMismatchError("one_hot is defined for single-label batches only")
    return F.one_hot(y.values, num_classes=y.k).to(DTYPE)


def per_example_loss(logits: torch.Tensor, y: LabelBatch, spec: LossSpec) -> torch.Tensor:
    """Per-example loss values, shape (m,). Differentiable."""
    if not spec.compatible_with(y.task):
        raise TaskMismatchError(
            f"loss kind {spec.kind.value!r} incompatible with task {y.task.value!r}"
        )
    if logits.shape[0] != len(y) or logits.shape[-1] != y.k:
        raise ContractError(
            f"logits shape {tuple(logits.shape)} does not match {len(y)} labels with k={y.k}"
        )
    if spec.kind is LossKind.CROSS_ENTROPY:
        return F.cross_entropy(logits, y.values, reduction="none")
    if spec.kind is LossKind.BCE_PER_CLASS:
        target = y.values.to(logits.dtype)
        return F.binary_cross_entropy_with_logits(
            logits, target, reduction="none"
        ).mean(dim=1)
    # neg-log-true-class: -log of the softmax probability of the true class,
    # with the probability floor applied inside the log
    probs = F.softmax(logits, dim=1)
    return neg_log_true_prob(probs, y.values)


def batch_loss(logits: torch.Tensor, y: LabelBatch, spec: LossSpec) -> torch.Tensor:
    """Mean loss over the batch (scalar tensor)."""
    return per_example_loss(logits, y, spec).mean()


def neg_log_true_prob(probs: torch.Tensor, y_idx: torch.Tensor) -> torch.Tensor:
    """-log(p_true) per example, computed from probabilities with the floor."""
    p_true = probs.gather(1, y_idx.view(-1, 1)).squeeze(1)
    return -torch.log(p_true.clamp(min=PROB_FLOOR))


def kl_divergence_rows(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    """Row-wise KL(p || q) for (m, k) probability matrices; result >= 0.

    Entries are floored before the logs; terms with p == 0 contribute exactly 0.
    """
    if p.shape != q.shape:
        raise ContractError(f"probability shapes differ: {tuple(p.shape)} vs {tuple(q.shape)}")
    logp = torch.log(p.clamp(min=PROB_FLOOR))
    logq = torch.log(q.clamp(min=PROB_FLOOR))
    terms = torch.where(p > 0, p * (logp - logq), torch.zeros_like(p))
    return terms.sum(dim=-1).clamp(min=0.0)


def kl_divergence(p, q) -> float:
    """KL divergence between two probability vectors, in nats."""
    pt = torch.as_tensor(p, dtype=DTYPE).reshape(-1)
    qt = torch.as_tensor(q, dtype=DTYPE).reshape(-1)
    if pt.shape != qt.shape:
        raise ContractError(
            f"probability vectors have different lengths: {pt.numel()} vs {qt.numel()}"
        )
    return float(kl_divergence_rows(pt.unsqueeze(0), qt.unsqueeze(0))[0])
