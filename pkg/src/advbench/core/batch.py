"""Image and label containers shared by every module.

Images live in normalized pixel space [0, 1]; any per-channel standardization a
model wants happens inside its forward pass, so perturbation budgets are always
in units of the [0, 1] range.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import torch

from ..errors import ContractError

DTYPE = torch.float64


class Task(str, Enum):
    SINGLE_LABEL = "single-label"
    MULTI_LABEL = "multi-label"


def as_image_tensor(data) -> torch.Tensor:
    """Coerce array-like image data to a float64 (m, c, h, w) tensor."""
    t = torch.as_tensor(np.asarray(data) if not torch.is_tensor(data) else data)
    return t.to(DTYPE)


@dataclass(frozen=True, eq=False)
class ImageBatch:
    """Batch of images, shape (m, c, h, w), every element in [0, 1]."""

    data: torch.Tensor
    ids: tuple

    def __post_init__(self):
        data = as_image_tensor(self.data)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        if data.dim() != 4:
            raise ContractError(
                f"image batch must be (m, c, h, w), got shape {tuple(data.shape)}"
            )
        if data.shape[0] == 0:
            raise ContractError("image batch must contain at least one image")
        if len(self.ids) != data.shape[0]:
            raise ContractError(
                f"{len(self.ids)} ids for {data.shape[0]} images"
            )
        if len(set(self.ids)) != len(self.ids):
            raise ContractError("image ids must be unique")
        lo, hi = float(data.min()), float(data.max())
        if lo < 0.0 or hi > 1.0:
            raise ContractError(
                f"pixel values outside [0, 1]: min={lo:.6g} max={hi:.6g}"
            )

    @classmethod
    def from_array(cls, data, ids=None, prefix: str = "img") -> "ImageBatch":
        data = as_image_tensor(data)
        if ids is None:
            ids = tuple(f"{prefix}-{i:05d}" for i in range(data.shape[0]))
        return cls(data=data, ids=tuple(ids))

    def with_data(self, data) -> "ImageBatch":
        """New batch with the same ids and replaced pixel data."""
        return ImageBatch(data=as_image_tensor(data), ids=self.ids)

    def select(self, idx) -> "ImageBatch":
        idx = list(idx)
        return ImageBatch(
            data=self.data[idx], ids=tuple(self.ids[i] for i in idx)
        )

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def image_shape(self):
        return tuple(self.data.shape[1:])


@dataclass(frozen=True, eq=False)
class LabelBatch:
    """Labels for a batch: class indices (single-label) or 0/1 vectors (multi)."""

    task: Task
    k: int
    values: torch.Tensor

    def __post_init__(self):
        task = Task(self.task)
        object.__setattr__(self, "task", task)
        values = torch.as_tensor(
            np.asarray(self.values) if not torch.is_tensor(self.values) else self.values
        ).to(torch.int64)
        object.__setattr__(self, "values", values)
        if self.k < 2:
            raise ContractError(f"class count k must be >= 2, got {self.k}")
        if task is Task.SINGLE_LABEL:
            if values.dim() != 1:
                raise ContractError("single-label values must be a 1-d index array")
            if len(values) and (values.min() < 0 or values.max() >= self.k):
                raise ContractError(
                    f"single-label values must lie in [0, {self.k - 1}]"
                )
        else:
            if values.dim() != 2 or values.shape[1] != self.k:
                raise ContractError(
                    f"multi-label values must be (m, {self.k}), got {tuple(values.shape)}"
                )
            if len(values) and not bool(((values == 0) | (values == 1)).all()):
                raise ContractError("multi-label vectors may contain only 0/1")

    @classmethod
    def single(cls, values, k: int) -> "LabelBatch":
        return cls(task=Task.SINGLE_LABEL, k=k, values=values)

    @classmethod
    def multi(cls, values, k: int) -> "LabelBatch":
        return cls(task=Task.MULTI_LABEL, k=k, values=values)

    def select(self, idx) -> "LabelBatch":
        idx = list(idx)
        return LabelBatch(task=self.task, k=self.k, values=self.values[idx])

    def __len__(self) -> int:
        return self.values.shape[0]
