"""Differentiable classifier contract: probabilities, losses, input gradients, taps.

Classifier wraps a torch module together with its task type and exposes the
query surface the rest of the toolkit relies on. Forward/gradient queries are
read-only with respect to parameters and safe to issue concurrently; training
mutates parameters exclusively.
"""

from __future__ import annotations

import hashlib
from typing import Optional

import torch
import torch.nn.functional as F

from ..errors import ContractError, NumericError
from .batch import DTYPE, ImageBatch, LabelBatch, Task
from .losses import LossSpec, batch_loss, default_loss, per_example_loss


class Classifier:
    """A trained (or trainable) image classifier with named layer taps."""

    def __init__(self, net: torch.nn.Module, task: Task, k: int,
                 input_shape: tuple, arch: str, seed: int):
        self.net = net.to(DTYPE)
        self.task = Task(task)
        self.k = int(k)
        self.input_shape = tuple(input_shape)
        self.arch = str(arch)
        self.seed = int(seed)

    # ---- forward surface -------------------------------------------------

    def _check_input(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or tuple(x.shape[1:]) != self.input_shape:
            raise ContractError(
                f"model {self.arch!r} expects input (m, {', '.join(map(str, self.input_shape))}), "
                f"got {tuple(x.shape)}"
            )
        return x.to(DTYPE)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(self._check_input(x))

    def probabilities(self, logits: torch.Tensor) -> torch.Tensor:
        if self.task is Task.SINGLE_LABEL:
            return F.softmax(logits, dim=1)
        return torch.sigmoid(logits)

    @property
    def taps(self) -> tuple:
        mods = getattr(self.net, "tap_modules", None)
        return tuple(mods().keys()) if mods is not None else ()

    @property
    def attention_taps(self) -> tuple:
        names = getattr(self.net, "attention_tap_names", None)
        return tuple(names()) if names is not None else ()

    def forward_with_taps(self, x: torch.Tensor, names) -> tuple:
        """Forward pass capturing the named layers' activations via hooks."""
        available = self.net.tap_modules() if hasattr(self.net, "tap_modules") else {}
        unknown = [n for n in names if n not in available]
        if unknown:
            raise ContractError(
                f"unknown tap(s) {unknown} for model {self.arch!r}; available: {sorted(available)}"
            )
        captured = {}
        handles = []
        for name in names:
            def _hook(_mod, _inp, out, _name=name):
                captured[_name] = out
            handles.append(available[name].register_forward_hook(_hook))
        try:
            logits = self.logits(x)
        finally:
            for h in handles:
                h.remove()
        return logits, captured

    # ---- persistence -----------------------------------------------------

    def parameter_hash(self) -> str:
        """SHA-256 over all parameter bytes, in name order."""
        digest = hashlib.sha256()
        state = self.net.state_dict()
        for name in sorted(state):
            digest.update(name.encode())
            digest.update(state[name].detach().cpu().contiguous().numpy().tobytes())
        return digest.hexdigest()

    def save(self, path, extra: Optional[dict] = None) -> None:
        payload = {
            "arch": self.arch,
            "task": self.task.value,
            "k": self.k,
            "input_shape": list(self.input_shape),
            "seed": self.seed,
            "state": self.net.state_dict(),
        }
        if extra:
            payload["extra"] = dict(extra)
        torch.save(payload, path)

    @classmethod
    def load(cls, path) -> "Classifier":
        from .zoo import build_classifier  # deferred: zoo imports this module

        payload = torch.load(path, weights_only=False)
        model = build_classifier(
            payload["arch"], k=payload["k"],
            input_shape=tuple(payload["input_shape"]), seed=payload["seed"],
        )
        model.net.load_state_dict(payload["state"])
        return model


# ---- module-level operations ----------------------------------------------


def _unwrap(x) -> torch.Tensor:
    return x.data if isinstance(x, ImageBatch) else torch.as_tensor(x).to(DTYPE)


def predict_proba(model: Classifier, x) -> torch.Tensor:
    """Probability matrix (m, k): softmax rows (single-label) or per-entry sigmoid."""
    with torch.no_grad():
        return model.probabilities(model.logits(_unwrap(x)))


def predict_labels(model: Classifier, x, threshold: float = 0.5) -> torch.Tensor:
    """Discrete predictions: argmax indices, or 0/1 vectors at the threshold.

    Argmax ties break toward the lowest class index.
    """
    probs = predict_proba(model, x)
    if model.task is Task.SINGLE_LABEL:
        return probs.argmax(dim=1)
    return (probs >= threshold).to(torch.int64)


def loss_and_input_grad(model: Classifier, x, y: LabelBatch,
                        loss: Optional[LossSpec] = None):
    """Batch-mean loss and its gradient with respect to the input pixels.

    Returns (loss value, gradient tensor shaped like the input). Raises
    NumericError naming the offending image ids if the loss is non-finite.
    """
    spec = loss or default_loss(model.task)
    ids = x.ids if isinstance(x, ImageBatch) else None
    xt = _unwrap(x).clone().requires_grad_(True)
    per_example = per_example_loss(model.logits(xt), y, spec)
    total = per_example.mean()
    if not torch.isfinite(total):
        bad = torch.nonzero(~torch.isfinite(per_example)).flatten().tolist()
        bad_ids = [ids[i] for i in bad] if ids is not None else bad
        raise NumericError(f"non-finite loss for images {bad_ids}")
    (grad,) = torch.autograd.grad(total, xt)
    return float(total.detach()), grad.detach()


__all__ = [
    "Classifier",
    "predict_proba",
    "predict_labels",
    "loss_and_input_grad",
    "batch_loss",
]
