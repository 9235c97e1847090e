"""Model zoo: three desk-scale architectures plus a linear model for oracles.

All nets are built without batch-norm or dropout so the forward pass is a pure
deterministic function of (parameters, input). Weight init draws from a forked
RNG seeded per (seed, arch), leaving the global torch stream untouched.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import ContractError
from ..seeding import child_seed
from .batch import DTYPE, Task
from .classifier import Classifier


class SmallCNN(nn.Module):
    """Two conv blocks and a dense head; taps expose both block activations."""

    def __init__(self, k: int, in_shape=(1, 28, 28), width: int = 16):
        super().__init__()
        c, h, w = in_shape
        self.conv1 = nn.Conv2d(c, width, kernel_size=3, padding=1)
        self.act1 = nn.ReLU()
        self.pool1 = nn.MaxPool2d(2)
        self.conv2 = nn.Conv2d(width, 2 * width, kernel_size=3, padding=1)
        self.act2 = nn.ReLU()
        self.pool2 = nn.MaxPool2d(2)
        self.flat = nn.Flatten()
        self.fc1 = nn.Linear(2 * width * (h // 4) * (w // 4), 64)
        self.act3 = nn.ReLU()
        self.fc2 = nn.Linear(64, k)

    def forward(self, x):
        x = self.pool1(self.act1(self.conv1(x)))
        x = self.pool2(self.act2(self.conv2(x)))
        return self.fc2(self.act3(self.fc1(self.flat(x))))

    def tap_modules(self):
        return {"conv1": self.act1, "conv2": self.act2, "embedding": self.act3}


class AttentionGate(nn.Module):
    """Pixel-wise gate; its output is the (m, 1, h, w) attention map."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, 1, kernel_size=1)

    def forward(self, features):
        return torch.sigmoid(self.conv(features))


class AttentionCNN(nn.Module):
    """SmallCNN trunk with two attention modules gating the conv features."""

    def __init__(self, k: int, in_shape=(1, 28, 28), width: int = 16):
        super().__init__()
        c, h, w = in_shape
        self.conv1 = nn.Conv2d(c, width, kernel_size=3, padding=1)
        self.act1 = nn.ReLU()
        self.gate1 = AttentionGate(width)
        self.pool1 = nn.MaxPool2d(2)
        self.conv2 = nn.Conv2d(width, 2 * width, kernel_size=3, padding=1)
        self.act2 = nn.ReLU()
        self.gate2 = AttentionGate(2 * width)
        self.pool2 = nn.MaxPool2d(2)
        self.flat = nn.Flatten()
        self.fc1 = nn.Linear(2 * width * (h // 4) * (w // 4), 64)
        self.act3 = nn.ReLU()
        self.fc2 = nn.Linear(64, k)

    def forward(self, x):
        f = self.act1(self.conv1(x))
        f = self.pool1(f * self.gate1(f))
        f = self.act2(self.conv2(f))
        f = self.pool2(f * self.gate2(f))
        return self.fc2(self.act3(self.fc1(self.flat(f))))

    def tap_modules(self):
        return {
            "conv1": self.act1,
            "conv2": self.act2,
            "embedding": self.act3,
            "attention1": self.gate1,
            "attention2": self.gate2,
        }

    def attention_tap_names(self):
        return ("attention1", "attention2")


class LinearNet(nn.Module):
    """Flattened linear map; closed-form gradients make it the oracle model."""

    def __init__(self, k: int, in_shape=(1, 28, 28)):
        super().__init__()
        c, h, w = in_shape
        self.flat = nn.Flatten()
        self.fc = nn.Linear(c * h * w, k)

    def forward(self, x):
        return self.fc(self.flat(x))


_ARCHS = {
    "small_cnn": (SmallCNN, Task.SINGLE_LABEL),
    "attn_cnn": (AttentionCNN, Task.SINGLE_LABEL),
    "multilabel_cnn": (SmallCNN, Task.MULTI_LABEL),
    "linear": (LinearNet, Task.SINGLE_LABEL),
}

ZOO_ARCHS = tuple(_ARCHS)


def build_classifier(arch: str, k: int, input_shape=(1, 28, 28),
                     seed: int = 0) -> Classifier:
    """Construct a zoo model with deterministic, seed-derived initialization."""
    if arch not in _ARCHS:
        raise ContractError(f"unknown architecture {arch!r}; known: {sorted(_ARCHS)}")
    cls, task = _ARCHS[arch]
    with torch.random.fork_rng():
        torch.manual_seed(child_seed(seed, "init", arch))
        if cls is LinearNet:
            net = cls(k=k, in_shape=input_shape)
        else:
            net = cls(k=k, in_shape=input_shape)
    return Classifier(net=net.to(DTYPE), task=task, k=k,
                      input_shape=input_shape, arch=arch, seed=seed)
