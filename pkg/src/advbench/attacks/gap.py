"""Trained perturbation generator: an encoder-decoder net attacking a frozen model.

The generator maps an image to a raw perturbation, which is rescaled into the
L-infinity ball (multiply by min(1, eps / ||u||_inf) per image), added to the
image, and clamped to the valid range. Training minimizes the mean
log-probability of the true class of the perturbed images (single-label), or
maximizes per-class binary cross-entropy (multi-label), with the classifier's
parameters frozen throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..core.batch import DTYPE, ImageBatch, Task
from ..core.classifier import Classifier, predict_labels
from ..core.dataset import Dataset
from ..core.losses import PROB_FLOOR
from ..errors import ContractError, NumericError
from ..seeding import child_seed, torch_generator
from .budget import AdversarialBatch, AttackBudget, make_adversarial_batch

_LOG_FLOOR = math.log(PROB_FLOOR)


class _ConvBlock(nn.Module):
    def __init__(self, c_in, c_out):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, kernel_size=3, padding=1)
        self.act = nn.ReLU()

    def forward(self, x):
        return self.act(self.conv(x))


class PerturbationGenerator(nn.Module):
    """3-level encoder-decoder with skip connections; output shape == input shape."""

    def __init__(self, in_channels: int = 1, base: int = 16):
        super().__init__()
        self.enc1 = _ConvBlock(in_channels, base)
        self.enc2 = _ConvBlock(base, 2 * base)
        self.enc3 = _ConvBlock(2 * base, 4 * base)
        self.pool = nn.MaxPool2d(2)
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.dec2 = _ConvBlock(4 * base + 2 * base, 2 * base)
        self.dec1 = _ConvBlock(2 * base + base, base)
        self.head = nn.Conv2d(base, in_channels, kernel_size=1)

    def forward(self, x):
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        e3 = self.enc3(self.pool(e2))
        d2 = self.dec2(torch.cat([self.up(e3), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up(d2), e1], dim=1))
        return self.head(d1)


def build_generator(in_channels: int = 1, base: int = 16,
                    seed: int = 0) -> PerturbationGenerator:
    with torch.random.fork_rng():
        torch.manual_seed(child_seed(seed, "init", "generator"))
        gen = PerturbationGenerator(in_channels=in_channels, base=base)
    return gen.to(DTYPE)


def scale_perturbation(raw: torch.Tensor, epsilon: float) -> torch.Tensor:
    """Rescale so each image's L-inf norm is <= epsilon; leave smaller ones alone."""
    squeeze = raw.dim() == 3
    u = raw.unsqueeze(0) if squeeze else raw
    norms = u.abs().amax(dim=tuple(range(1, u.dim())), keepdim=True)
    factor = torch.where(
        norms > 0,
        torch.clamp(epsilon / norms.clamp(min=1e-300), max=1.0),
        torch.ones_like(norms),
    )
    out = u * factor
    return out.squeeze(0) if squeeze else out


def gap_perturb(gen: PerturbationGenerator, x: ImageBatch, epsilon: float,
                model: Optional[Classifier] = None) -> AdversarialBatch:
    """perturbed = clamp(x + scaled generator output); predictions if model given."""
    with torch.no_grad():
        raw = gen(x.data)
    if raw.shape != x.data.shape:
        raise ContractError(
            f"generator output shape {tuple(raw.shape)} != input {tuple(x.data.shape)}"
        )
    scaled = scale_perturbation(raw, epsilon)
    perturbed = x.with_data(torch.clamp(x.data + scaled, 0.0, 1.0))
    budget = AttackBudget(epsilon=epsilon, alpha=0.0, steps=0)
    return make_adversarial_batch(model, x, perturbed, budget)


@dataclass
class GapTrainConfig:
    epochs: int = 6
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0


@dataclass
class GapEpochRecord:
    epoch: int
    objective: float           # mean log p_true of perturbed train images
    train_fooling: float
    val_fooling: float

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "objective": self.objective,
                "train_fooling": self.train_fooling, "val_fooling": self.val_fooling}


def _gap_objective(model: Classifier, logits: torch.Tensor, y) -> torch.Tensor:
    if model.task is Task.SINGLE_LABEL:
        logp = F.log_softmax(logits, dim=1).clamp(min=_LOG_FLOOR)
        return logp.gather(1, y.values.view(-1, 1)).mean()
    # multi-label: push per-class BCE against the true vector up
    target = y.values.to(logits.dtype)
    return -F.binary_cross_entropy_with_logits(logits, target)


def _fooling(gen, model, images: ImageBatch, epsilon: float) -> float:
    batch = gap_perturb(gen, images, epsilon, model=model)
    return float(batch.success.to(torch.float64).mean())


def train_gap_generator(gen: PerturbationGenerator, model: Classifier,
                        data: Dataset, epsilon: float,
                        cfg: Optional[GapTrainConfig] = None):
    """Train the generator against a frozen classifier.

    Returns (generator, per-epoch log records). The classifier's parameters
    are never updated; callers can verify via Classifier.parameter_hash().
    """
    cfg = cfg or GapTrainConfig()
    train = data.split("train")
    val = data.split("val") if "val" in data.splits else train
    frozen_flags = [p.requires_grad for p in model.net.parameters()]
    for p in model.net.parameters():
        p.requires_grad_(False)
    model.net.eval()
    opt = torch.optim.Adam(gen.parameters(), lr=cfg.lr)
    shuffle_rng = torch_generator(cfg.seed, "gap", "shuffle")
    n = len(train)
    log = []
    try:
        for epoch in range(cfg.epochs):
            order = torch.randperm(n, generator=shuffle_rng)
            epoch_obj, seen = 0.0, 0
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                x = train.images.data[idx]
                y = train.labels.select(idx.tolist())
                u = scale_perturbation(gen(x), epsilon)
                x_adv = torch.clamp(x + u, 0.0, 1.0)
                obj = _gap_objective(model, model.logits(x_adv), y)
                if not torch.isfinite(obj):
                    raise NumericError(
                        f"non-finite generator objective at epoch {epoch} batch {start // cfg.batch_size}"
                    )
                opt.zero_grad()
                obj.backward()
                opt.step()
                epoch_obj += float(obj.detach()) * len(idx)
                seen += len(idx)
            log.append(GapEpochRecord(
                epoch=epoch,
                objective=epoch_obj / seen,
                train_fooling=_fooling(gen, model, train.images, epsilon),
                val_fooling=_fooling(gen, model, val.images, epsilon),
            ))
    finally:
        for p, flag in zip(model.net.parameters(), frozen_flags):
            p.requires_grad_(flag)
    return gen, log
