"""Label co-occurrence counts for multi-label predictions."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ContractError


@dataclass(eq=False)
class CooccurrenceMatrix:
    """Symmetric k x k counts; diagonal holds per-label occurrence counts."""

    counts: np.ndarray
    label_names: tuple
    threshold: int = 0

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ContractError("co-occurrence counts must be square")
        if not np.array_equal(c, c.T):
            raise ContractError("co-occurrence counts must be symmetric")
        if (c < 0).any():
            raise ContractError("co-occurrence counts must be non-negative")
        self.counts = c.astype(np.int64)

    @property
    def k(self) -> int:
        return self.counts.shape[0]


def label_cooccurrence(pred_vectors, label_names=None,
                       threshold: int = 0) -> CooccurrenceMatrix:
    """Count pairs of labels predicted together; diagonal = per-label counts."""
    vectors = np.asarray(
        pred_vectors.detach().cpu().numpy() if hasattr(pred_vectors, "detach")
        else pred_vectors
    )
    if vectors.ndim != 2:
        raise ContractError("predictions must be an (m, k) binary matrix")
    if not np.isin(vectors, (0, 1)).all():
        raise ContractError("co-occurrence needs binary 0/1 predictions")
    vectors = vectors.astype(np.int64)
    counts = vectors.T @ vectors            # (a, b): images with both; diag: occurrences
    k = vectors.shape[1]
    names = tuple(label_names) if label_names else tuple(f"label-{i}" for i in range(k))
    if len(names) != k:
        raise ContractError(f"{len(names)} label names for k={k}")
    return CooccurrenceMatrix(counts=counts, label_names=names, threshold=threshold)


def export_cooccurrence_csv(matrix: CooccurrenceMatrix, path) -> Path:
    """Write (label_a, label_b, count) rows for entries above the threshold.

    Upper triangle including the diagonal; feeds external chord-diagram tools.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label_a", "label_b", "count"])
        for a in range(matrix.k):
            for b in range(a, matrix.k):
                count = int(matrix.counts[a, b])
                if count > matrix.threshold:
                    writer.writerow([matrix.label_names[a], matrix.label_names[b], count])
    return path
