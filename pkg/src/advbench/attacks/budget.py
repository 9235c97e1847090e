"""Attack budgets and the adversarial-batch result type with persistence."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..core.batch import DTYPE, ImageBatch, Task
from ..errors import ContractError

BALL_TOL = 1e-7


class AttackMode(str, Enum):
    NON_TARGET = "non-target"
    TARGETED = "targeted"


@dataclass(frozen=True)
class AttackBudget:
    """L-infinity attack budget in normalized pixel units.

    alpha defaults to epsilon / 4 when left unset.
    """

    epsilon: float
    alpha: Optional[float] = None
    steps: int = 1
    random_init: bool = False
    mode: AttackMode = AttackMode.NON_TARGET

    def __post_init__(self):
        if self.epsilon < 0:
            raise ContractError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.alpha is not None and self.alpha < 0:
            raise ContractError(f"alpha must be >= 0, got {self.alpha}")
        if self.steps < 0 or int(self.steps) != self.steps:
            raise ContractError(f"steps must be a non-negative integer, got {self.steps}")
        object.__setattr__(self, "mode", AttackMode(self.mode))

    @property
    def resolved_alpha(self) -> float:
        return self.epsilon / 4.0 if self.alpha is None else self.alpha

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "alpha": self.resolved_alpha,
            "steps": int(self.steps),
            "random_init": bool(self.random_init),
            "mode": self.mode.value,
        }


@dataclass(eq=False)
class AdversarialBatch:
    """Original/perturbed pair with budget bookkeeping and success flags."""

    original: ImageBatch
    perturbed: ImageBatch
    delta: torch.Tensor
    budget: AttackBudget
    clean_pred: Optional[torch.Tensor] = None
    adv_pred: Optional[torch.Tensor] = None
    success: Optional[torch.Tensor] = None
    seed: Optional[int] = None
    target: Optional[torch.Tensor] = None

    def __post_init__(self):
        if self.original.data.shape != self.perturbed.data.shape:
            raise ContractError("original and perturbed shapes differ")
        if not torch.equal(self.delta, self.perturbed.data - self.original.data):
            raise ContractError("delta must equal perturbed - original bit-exactly")
        max_dev = float(self.delta.abs().max()) if self.delta.numel() else 0.0
        if max_dev > self.budget.epsilon + BALL_TOL:
            raise ContractError(
                f"perturbation leaves the epsilon-ball: {max_dev} > {self.budget.epsilon}"
            )

    @property
    def max_deviation(self) -> float:
        return float(self.delta.abs().max())


def _prediction_changed(task: Task, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if task is Task.SINGLE_LABEL:
        return a != b
    return (a != b).any(dim=1)


def make_adversarial_batch(model, original: ImageBatch, perturbed: ImageBatch,
                           budget: AttackBudget, seed=None,
                           target=None) -> AdversarialBatch:
    """Assemble an AdversarialBatch, filling predictions when a model is given."""
    delta = perturbed.data - original.data
    clean_pred = adv_pred = success = None
    if model is not None:
        from ..core.classifier import predict_labels

        clean_pred = predict_labels(model, original)
        adv_pred = predict_labels(model, perturbed)
        if budget.mode is AttackMode.TARGETED:
            if target is None:
                raise ContractError("targeted batch requires target labels")
            tgt = target.values if hasattr(target, "values") else torch.as_tensor(target)
            if model.task is Task.SINGLE_LABEL:
                success = adv_pred == tgt
            else:
                success = (adv_pred == tgt).all(dim=1)
        else:
            success = _prediction_changed(model.task, clean_pred, adv_pred)
    return AdversarialBatch(
        original=original, perturbed=perturbed, delta=delta, budget=budget,
        clean_pred=clean_pred, adv_pred=adv_pred, success=success, seed=seed,
        target=None if target is None else torch.as_tensor(
            target.values if hasattr(target, "values") else target),
    )


# ---- persistence ------------------------------------------------------------


def save_adversarial_batch(batch: AdversarialBatch, root, labels=None) -> Path:
    """Persist perturbed images (lossless float64 .npy) plus the budget record."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for i, image_id in enumerate(batch.perturbed.ids):
        rel = f"images/{image_id}.npy"
        np.save(root / rel, batch.perturbed.data[i].numpy())
        rec = {"id": image_id, "file": rel, "split": "adversarial"}
        if labels is not None:
            val = labels.values[i]
            rec["label"] = int(val) if val.dim() == 0 else [int(v) for v in val]
        records.append(rec)
    with open(root / "manifest.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    record = dict(batch.budget.to_dict(), seed=batch.seed)
    with open(root / "budget.json", "w") as fh:
        json.dump(record, fh, sort_keys=True)
    if batch.clean_pred is not None:
        with open(root / "predictions.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "clean_pred", "adv_pred", "success"])
            for i, image_id in enumerate(batch.perturbed.ids):
                writer.writerow([
                    image_id,
                    _fmt_pred(batch.clean_pred[i]),
                    _fmt_pred(batch.adv_pred[i]),
                    int(batch.success[i]),
                ])
    return root


def _fmt_pred(pred: torch.Tensor) -> str:
    if pred.dim() == 0:
        return str(int(pred))
    return "".join(str(int(v)) for v in pred)


def load_adversarial_images(root) -> tuple:
    """Load a persisted adversarial set: (ImageBatch, budget record dict)."""
    root = Path(root)
    with open(root / "budget.json") as fh:
        record = json.load(fh)
    ids, arrays = [], []
    with open(root / "manifest.jsonl") as fh:
        for line in fh:
            rec = json.loads(line)
            ids.append(rec["id"])
            arrays.append(np.load(root / rec["file"]))
    data = torch.as_tensor(np.stack(arrays)).to(DTYPE)
    return ImageBatch(data=data, ids=tuple(ids)), record
