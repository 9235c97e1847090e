"""Flip probability over perturbation sequences, and the relative variant.

Adjacent mode counts disagreements between consecutive frames; vs-clean mode
compares every later frame against the clean first frame (the right reading
for i.i.d. noise sequences, which are not temporally related). Defaults pick
vs-clean for the noise category and adjacent otherwise.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..core.batch import DTYPE, Task
from ..core.classifier import Classifier, predict_labels
from ..errors import ContractError, UndefinedRatioError
from .perturb import resolve_type
from .sequence import BenchmarkManifest

MODES = ("adjacent", "vs-clean")


def default_fp_mode(ptype) -> str:
    return "vs-clean" if resolve_type(getattr(ptype, "key", ptype)).category == "noise" \
        else "adjacent"


def _labels_equal(a, b) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and bool((a == b).all())


def flip_probability(predictions, mode: str = "adjacent") -> float:
    """Fraction of compared frame pairs whose predictions disagree.

    `predictions` is a list of per-sequence label lists (ints for single-label,
    0/1 vectors compared exactly for multi-label); all sequences must share the
    same length n >= 2. Result is flips / (r * (n - 1)).
    """
    if mode not in MODES:
        raise ContractError(f"mode must be one of {MODES}, got {mode!r}")
    seqs = [list(seq) for seq in predictions]
    if not seqs:
        raise ContractError("need at least one prediction sequence")
    n = len(seqs[0])
    if n < 2:
        raise ContractError("sequences must have length >= 2")
    if any(len(seq) != n for seq in seqs):
        raise ContractError("ragged prediction sequences")
    flips = 0
    for seq in seqs:
        for j in range(1, n):
            ref = seq[0] if mode == "vs-clean" else seq[j - 1]
            if not _labels_equal(seq[j], ref):
                flips += 1
    return flips / (len(seqs) * (n - 1))


def relative_flip_probability(fp_model: float, fp_benchmark_model: float) -> float:
    """FP of a model divided by the designated benchmark model's FP."""
    if fp_benchmark_model <= 0.0:
        raise UndefinedRatioError(
            "benchmark model FP is zero; relative flip probability is undefined"
        )
    return fp_model / fp_benchmark_model


# ---- scoring a model or an external prediction file -------------------------


def sequence_predictions(model: Classifier, manifest: BenchmarkManifest,
                         batch_size: int = 256) -> dict:
    """Discrete predictions per sequence id, frame order preserved."""
    out = {}
    for rec in manifest.records:
        frames = torch.as_tensor(manifest.load_frames(rec)).to(DTYPE)
        preds = []
        for start in range(0, frames.shape[0], batch_size):
            p = predict_labels(model, frames[start:start + batch_size])
            preds.extend(p.tolist() if model.task is Task.SINGLE_LABEL
                         else [row.tolist() for row in p])
        out[rec["sequence_id"]] = preds
    return out


def benchmark_flip_probability(manifest: BenchmarkManifest, predictions: dict,
                               mode: Optional[str] = None) -> dict:
    """Aggregate FP over a benchmark, honoring per-type default modes.

    Returns overall FP, per-type FP, and the mode used per type.
    """
    by_type: dict = {}
    for rec in manifest.records:
        if rec["sequence_id"] not in predictions:
            raise ContractError(f"no predictions for sequence {rec['sequence_id']}")
        by_type.setdefault(rec["type"], []).append(predictions[rec["sequence_id"]])
    per_type, modes, flip_weight = {}, {}, 0.0
    total_sequences = 0
    for key, seqs in sorted(by_type.items()):
        m = mode or default_fp_mode(key)
        modes[key] = m
        per_type[key] = flip_probability(seqs, m)
        flip_weight += per_type[key] * len(seqs)
        total_sequences += len(seqs)
    overall = flip_weight / total_sequences
    return {"overall": overall, "per_type": per_type, "modes": modes}


def write_predictions_csv(predictions: dict, path) -> Path:
    """Persist predictions as (sequence id, frame index, label-or-bitvector)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence_id", "frame_index", "prediction"])
        for seq_id in sorted(predictions):
            for j, label in enumerate(predictions[seq_id]):
                if isinstance(label, (list, tuple, np.ndarray)):
                    text = ";".join(str(int(v)) for v in label)
                else:
                    text = str(int(label))
                writer.writerow([seq_id, j, text])
    return path


def read_predictions_csv(path) -> dict:
    """Load a predictions CSV produced here or by an external model.

    Multi-label rows are ';'-joined 0/1 vectors; single-label rows are ints.
    """
    rows: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            text = row["prediction"].strip()
            label = [int(v) for v in text.split(";")] if ";" in text else int(text)
            rows.setdefault(row["sequence_id"], []).append(
                (int(row["frame_index"]), label))
    out = {}
    for seq_id, pairs in rows.items():
        pairs.sort()
        out[seq_id] = [label for _, label in pairs]
    return out
