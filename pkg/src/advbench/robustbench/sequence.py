"""Perturbation sequences and the on-disk benchmark dataset.

A sequence is the clean image followed by frames of weakly increasing
severity. Building a benchmark materializes one sequence per (test image,
perturbation type) as lossless .npy files plus a line-delimited manifest;
regeneration with the same seed is bit-identical.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core.dataset import Dataset
from ..errors import ContractError
from ..seeding import numpy_generator
from .perturb import PERTURBATION_TYPES, PerturbationType, apply_perturbation, resolve_type

DEFAULT_FRAMES = 21


@dataclass(eq=False)
class PerturbationSequence:
    frames: np.ndarray            # (n, c, h, w), frame 0 is the clean image
    ptype: PerturbationType
    severities: tuple
    source_id: str
    seed: int

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[0] < 2:
            raise ContractError("sequence needs at least 2 frames of shape (c, h, w)")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def generate_sequence(image, ptype, n_frames: int = DEFAULT_FRAMES,
                      seed: int = 0, image_id: str = "",
                      max_severity: float = 1.0) -> PerturbationSequence:
    """Clean frame plus (n_frames - 1) frames ramped up to max_severity.

    Noise-category frames are independent redraws on the clean image from a
    seed-derived stream; other categories are deterministic and ignore the
    build seed entirely.
    """
    ptype = ptype if isinstance(ptype, PerturbationType) else resolve_type(ptype)
    image = np.asarray(
        image.detach().numpy() if hasattr(image, "detach") else image,
        dtype=np.float64,
    )
    if n_frames < 2:
        raise ContractError(f"n_frames must be >= 2, got {n_frames}")
    rng = (numpy_generator(seed, "bench", ptype.key, image_id)
           if ptype.category == "noise" else None)
    frames = [image.copy()]
    severities = [0.0]
    for j in range(1, n_frames):
        s = max_severity * j / (n_frames - 1)
        frames.append(apply_perturbation(image, ptype, s, image_id=image_id, rng=rng))
        severities.append(s)
    return PerturbationSequence(
        frames=np.stack(frames), ptype=ptype, severities=tuple(severities),
        source_id=image_id, seed=seed,
    )


# ---- benchmark on disk -------------------------------------------------------


def _sha256(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


@dataclass(eq=False)
class BenchmarkManifest:
    dataset: str
    split: str
    n_frames: int
    seed: int
    types: tuple
    max_severity: float
    records: list = field(default_factory=list)
    root: Path = None

    @property
    def r(self) -> int:
        return len(self.records)

    def sequence_path(self, record: dict) -> Path:
        return Path(self.root) / record["file"]

    def load_frames(self, record: dict) -> np.ndarray:
        return np.load(self.sequence_path(record))


def build_benchmark(dataset: Dataset, out_dir, types=None,
                    n_frames: int = DEFAULT_FRAMES, seed: int = 0,
                    split: str = "test", max_images=None,
                    max_severity: float = 1.0) -> BenchmarkManifest:
    """Materialize sequences for every (image, type) pair of the chosen split."""
    sp = dataset.split(split)
    if len(sp) == 0:
        raise ContractError(f"split {split!r} is empty")
    type_keys = sorted(
        resolve_type(t).key for t in (types or PERTURBATION_TYPES)
    )
    out_dir = Path(out_dir)
    created = not out_dir.exists()
    (out_dir / "frames").mkdir(parents=True, exist_ok=True)
    n_images = len(sp) if max_images is None else min(max_images, len(sp))
    manifest = BenchmarkManifest(
        dataset=dataset.name, split=split, n_frames=n_frames, seed=seed,
        types=tuple(type_keys), max_severity=max_severity, records=[], root=out_dir,
    )
    try:
        for i in range(n_images):
            image_id = sp.images.ids[i]
            image = sp.images.data[i].numpy()
            for key in type_keys:
                seq = generate_sequence(image, key, n_frames, seed,
                                        image_id=image_id, max_severity=max_severity)
                rel = f"frames/{image_id}__{key}.npy"
                np.save(out_dir / rel, seq.frames)
                manifest.records.append({
                    "sequence_id": f"{image_id}__{key}",
                    "source_id": image_id,
                    "type": key,
                    "seed": seed,
                    "file": rel,
                    "sha256": _sha256(seq.frames),
                    "clean_sha256": _sha256(seq.frames[0]),
                    "n_frames": n_frames,
                })
        with open(out_dir / "manifest.jsonl", "w") as fh:
            for rec in manifest.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        with open(out_dir / "bench.json", "w") as fh:
            json.dump({
                "dataset": dataset.name, "split": split, "n_frames": n_frames,
                "seed": seed, "types": list(type_keys),
                "max_severity": max_severity, "r": manifest.r,
            }, fh, sort_keys=True)
    except OSError:
        if created and out_dir.exists():
            shutil.rmtree(out_dir)
        raise
    return manifest


def load_benchmark(root) -> BenchmarkManifest:
    root = Path(root)
    with open(root / "bench.json") as fh:
        meta = json.load(fh)
    records = []
    with open(root / "manifest.jsonl") as fh:
        for line in fh:
            records.append(json.loads(line))
    if meta["r"] != len(records):
        raise ContractError(
            f"manifest says r={meta['r']} but has {len(records)} records"
        )
    return BenchmarkManifest(
        dataset=meta["dataset"], split=meta["split"], n_frames=meta["n_frames"],
        seed=meta["seed"], types=tuple(meta["types"]),
        max_severity=meta["max_severity"], records=records, root=root,
    )


def verify_benchmark(manifest: BenchmarkManifest, dataset: Dataset = None) -> dict:
    """Audit: files exist, hashes match, frame counts agree, frame 1 == clean.

    Returns summary counts; raises ContractError on any violation.
    """
    clean_by_id = {}
    if dataset is not None:
        sp = dataset.split(manifest.split)
        clean_by_id = {
            sp.images.ids[i]: sp.images.data[i].numpy() for i in range(len(sp))
        }
    checked_frames = 0
    for rec in manifest.records:
        path = manifest.sequence_path(rec)
        if not path.exists():
            raise ContractError(f"missing sequence file {rec['file']}")
        frames = np.load(path)
        if frames.shape[0] != rec["n_frames"]:
            raise ContractError(f"{rec['sequence_id']}: bad frame count")
        if _sha256(frames) != rec["sha256"]:
            raise ContractError(f"{rec['sequence_id']}: sequence hash mismatch")
        if _sha256(frames[0]) != rec["clean_sha256"]:
            raise ContractError(f"{rec['sequence_id']}: clean-frame hash mismatch")
        if rec["source_id"] in clean_by_id:
            if _sha256(clean_by_id[rec["source_id"]]) != rec["clean_sha256"]:
                raise ContractError(
                    f"{rec['sequence_id']}: frame 1 differs from the dataset image"
                )
        checked_frames += frames.shape[0]
    return {"sequences": manifest.r, "frames": checked_frames}
