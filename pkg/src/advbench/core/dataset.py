"""Datasets: aligned image/label splits plus the on-disk manifest format.

On disk a dataset is a directory of lossless float64 .npy image files and a
line-delimited JSON manifest (one record per image: id, file, label, split),
with dataset-level metadata in dataset.json.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..errors import ContractError
from .batch import DTYPE, ImageBatch, LabelBatch, Task

SPLITS = ("train", "val", "test")


@dataclass(eq=False)
class Split:
    images: ImageBatch
    labels: LabelBatch

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ContractError(
                f"split has {len(self.images)} images but {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.images)


@dataclass(eq=False)
class Dataset:
    """Immutable-by-convention dataset with disjoint named splits."""

    name: str
    task: Task
    k: int
    splits: dict

    def __post_init__(self):
        self.task = Task(self.task)
        seen = set()
        for split_name, split in self.splits.items():
            if split.labels.task is not self.task or split.labels.k != self.k:
                raise ContractError(
                    f"split {split_name!r} labels disagree with dataset task/k"
                )
            dup = seen.intersection(split.images.ids)
            if dup:
                raise ContractError(f"ids shared across splits: {sorted(dup)[:5]}")
            seen.update(split.images.ids)

    @property
    def m(self) -> int:
        return sum(len(s) for s in self.splits.values())

    def split(self, name: str) -> Split:
        if name not in self.splits:
            raise ContractError(f"dataset {self.name!r} has no split {name!r}")
        return self.splits[name]


def _label_to_json(label: torch.Tensor, task: Task):
    if task is Task.SINGLE_LABEL:
        return int(label)
    return [int(v) for v in label]


def save_dataset(dataset: Dataset, root) -> Path:
    """Write images as float64 .npy files plus manifest.jsonl / dataset.json."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for split_name in sorted(dataset.splits):
        split = dataset.splits[split_name]
        for i, image_id in enumerate(split.images.ids):
            rel = f"images/{image_id}.npy"
            np.save(root / rel, split.images.data[i].numpy())
            records.append({
                "id": image_id,
                "file": rel,
                "label": _label_to_json(split.labels.values[i], dataset.task),
                "split": split_name,
            })
    with open(root / "manifest.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(root / "dataset.json", "w") as fh:
        json.dump({"name": dataset.name, "task": dataset.task.value,
                   "k": dataset.k}, fh, sort_keys=True)
    return root


def load_dataset(root) -> Dataset:
    root = Path(root)
    with open(root / "dataset.json") as fh:
        meta = json.load(fh)
    task = Task(meta["task"])
    k = int(meta["k"])
    by_split: dict = {}
    with open(root / "manifest.jsonl") as fh:
        for line in fh:
            rec = json.loads(line)
            by_split.setdefault(rec["split"], []).append(rec)
    splits = {}
    for split_name, recs in by_split.items():
        images = [np.load(root / rec["file"]) for rec in recs]
        data = torch.as_tensor(np.stack(images)).to(DTYPE)
        ids = tuple(rec["id"] for rec in recs)
        labels = [rec["label"] for rec in recs]
        values = np.array(labels)
        lb = (LabelBatch.single(values, k) if task is Task.SINGLE_LABEL
              else LabelBatch.multi(values, k))
        splits[split_name] = Split(images=ImageBatch(data=data, ids=ids), labels=lb)
    return Dataset(name=meta["name"], task=task, k=k, splits=splits)
