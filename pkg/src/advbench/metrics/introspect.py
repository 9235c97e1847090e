"""Model introspection: saliency maps, layer activations, attention maps,
and feature-embedding export for external dimensionality reduction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..core.batch import DTYPE, ImageBatch, LabelBatch, Task
from ..core.classifier import Classifier, loss_and_input_grad
from ..core.losses import LossSpec
from ..errors import CapabilityError, ContractError


@dataclass(frozen=True)
class SaliencyMap:
    """Normalized per-pixel gradient-magnitude map with min/max sidecar."""

    values: np.ndarray     # (h, w) in [0, 1]
    vmin: float
    vmax: float

    @property
    def raw(self) -> np.ndarray:
        return self.values * (self.vmax - self.vmin) + self.vmin


def _single_image(x) -> ImageBatch:
    if isinstance(x, ImageBatch):
        if len(x) != 1:
            raise ContractError("introspection ops take a single image")
        return x
    t = torch.as_tensor(np.asarray(x) if not torch.is_tensor(x) else x).to(DTYPE)
    if t.dim() == 3:
        t = t.unsqueeze(0)
    return ImageBatch.from_array(t, ids=("probe",))


def saliency_map(model: Classifier, x, y: LabelBatch,
                 loss: Optional[LossSpec] = None) -> SaliencyMap:
    """Channelwise max of |d loss / d pixel|, min-max normalized for export."""
    xb = _single_image(x)
    _, grad = loss_and_input_grad(model, xb, y, loss)
    mag = grad[0].abs().amax(dim=0).numpy()
    vmin, vmax = float(mag.min()), float(mag.max())
    if vmax > vmin:
        values = (mag - vmin) / (vmax - vmin)
    else:
        values = np.zeros_like(mag)
    return SaliencyMap(values=values, vmin=vmin, vmax=vmax)


def feature_maps(model: Classifier, x, tap: str) -> np.ndarray:
    """Activations of the named layer for one image, shape (channels, h, w)."""
    xb = _single_image(x)
    with torch.no_grad():
        _, captured = model.forward_with_taps(xb.data, [tap])
    return captured[tap][0].detach().numpy()


def attention_maps(model: Classifier, x) -> dict:
    """Spatial attention maps per module, each normalized to sum to 1."""
    taps = model.attention_taps
    if not taps:
        raise CapabilityError(f"model {model.arch!r} exposes no attention taps")
    xb = _single_image(x)
    with torch.no_grad():
        _, captured = model.forward_with_taps(xb.data, list(taps))
    maps = {}
    for name in taps:
        raw = captured[name][0].sum(dim=0).detach().numpy()
        total = raw.sum()
        maps[name] = raw / total if total > 0 else np.full_like(raw, 1.0 / raw.size)
    return maps


def embedding_vectors(model: Classifier, images: ImageBatch, tap: str,
                      batch_size: int = 256) -> np.ndarray:
    """Flattened tap activations, one row per image."""
    rows = []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            chunk = images.data[start:start + batch_size]
            _, captured = model.forward_with_taps(chunk, [tap])
            rows.append(captured[tap].flatten(start_dim=1).detach().numpy())
    return np.concatenate(rows, axis=0)


def export_embeddings(model: Classifier, images: ImageBatch, labels: LabelBatch,
                      tap: str, path, split: str = "test",
                      variant: str = "clean") -> Path:
    """One CSV row per image: id, split, clean/adversarial tag, label, features."""
    vectors = embedding_vectors(model, images, tap)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        dim = vectors.shape[1]
        writer.writerow(["id", "split", "variant", "label"]
                        + [f"f{i}" for i in range(dim)])
        for i, image_id in enumerate(images.ids):
            val = labels.values[i]
            label = (str(int(val)) if labels.task is Task.SINGLE_LABEL
                     else ";".join(str(int(v)) for v in val))
            writer.writerow([image_id, split, variant, label]
                            + [f"{v:.9g}" for v in vectors[i]])
    return path
