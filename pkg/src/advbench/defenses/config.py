"""Training configuration and structured per-epoch logs for the defense loops."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..attacks.budget import AttackBudget
from ..errors import ContractError

# Robust-accuracy budget used in defense comparisons unless overridden
DEFAULT_EVAL_BUDGET = AttackBudget(epsilon=0.03, alpha=0.03 / 4, steps=5,
                                   random_init=True)

Range = Union[float, tuple]


def _as_range(value, name: str) -> tuple:
    if isinstance(value, (tuple, list)):
        lo, hi = float(value[0]), float(value[1])
    else:
        lo = hi = float(value)
    if hi < lo:
        raise ContractError(f"{name} range is empty: ({lo}, {hi})")
    return lo, hi


@dataclass
class TrainConfig:
    """Knobs for every defense trainer.

    epsilon / inner_steps may be scalars (fixed) or (lo, hi) ranges; only the
    randomized trainer samples from ranges. alpha_inner defaults to the
    (sampled) epsilon divided by 4.
    """

    outer_epochs: int = 8
    batch_size: int = 64
    lr: float = 0.05
    momentum: float = 0.9
    epsilon: Range = 4.0 / 255.0
    inner_steps: Union[int, tuple] = 4
    alpha_inner: Optional[float] = None
    lam: float = 1.0
    branch_threshold: float = 0.5
    seed: int = 0
    eval_budget: Optional[AttackBudget] = None
    eval_max_images: int = 128

    def __post_init__(self):
        if self.outer_epochs < 1:
            raise ContractError("outer_epochs must be >= 1")
        if self.lam < 0:
            raise ContractError(f"lambda must be >= 0, got {self.lam}")
        _as_range(self.epsilon, "epsilon")
        lo, hi = _as_range(self.inner_steps, "inner_steps")
        if lo < 0:
            raise ContractError("inner_steps must be >= 0")

    def epsilon_range(self) -> tuple:
        return _as_range(self.epsilon, "epsilon")

    def steps_range(self) -> tuple:
        return _as_range(self.inner_steps, "inner_steps")

    def fixed_epsilon(self) -> float:
        lo, hi = self.epsilon_range()
        if lo != hi:
            raise ContractError("this trainer requires a fixed epsilon, not a range")
        return lo

    def fixed_steps(self) -> int:
        lo, hi = self.steps_range()
        if lo != hi:
            raise ContractError("this trainer requires a fixed step count, not a range")
        return int(lo)

    def resolved_eval_budget(self) -> AttackBudget:
        return self.eval_budget or DEFAULT_EVAL_BUDGET


@dataclass
class EpochRecord:
    epoch: int
    clean_accuracy: float
    robust_accuracy: float
    ce_loss: float
    reg_loss: float = 0.0
    draws: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "clean_accuracy": self.clean_accuracy,
            "robust_accuracy": self.robust_accuracy,
            "ce_loss": self.ce_loss,
            "reg_loss": self.reg_loss,
            "draws": self.draws,
        }


@dataclass
class TrainLog:
    method: str
    records: list = field(default_factory=list)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def save_jsonl(self, path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(dict(rec.to_dict(), method=self.method),
                                    sort_keys=True) + "\n")
        return path
