"""Synthetic 28x28 datasets spanning binary, multi-class, and multi-label tasks.

blobs: two-class lesion-like blobs (smooth round vs irregular multi-lobe).
digits: ten glyph classes rendered from an in-code 5x7 font with jitter/noise.
shapes: eight overlapping shape labels for the multi-label path.

Generation is a pure function of (name, sizes, seed).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..core.batch import ImageBatch, LabelBatch, Task
from ..core.dataset import Dataset, Split
from ..errors import ContractError
from ..seeding import numpy_generator

SIDE = 28

_DIGIT_FONT = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    3: ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}


def _glyph(digit: int, scale: int = 3) -> np.ndarray:
    rows = _DIGIT_FONT[digit]
    bitmap = np.array([[int(ch) for ch in row] for row in rows], dtype=np.float64)
    return np.kron(bitmap, np.ones((scale, scale)))


def _digit_image(digit: int, rng: np.random.Generator) -> np.ndarray:
    # moderate contrast + rotation/blur/noise keep pixel-space margins small
    # enough that L-inf attacks at desk-scale budgets actually bite
    # wide contrast range with a low tail: the dim digits sit near the
    # attack budgets' decision margin, so robustness does not saturate
    canvas = np.zeros((SIDE, SIDE))
    glyph = _glyph(digit) * rng.uniform(0.12, 0.55)
    glyph = ndimage.rotate(glyph, rng.uniform(-14, 14), reshape=False,
                           order=1, mode="constant")
    gh, gw = glyph.shape
    top = (SIDE - gh) // 2 + rng.integers(-3, 4)
    left = (SIDE - gw) // 2 + rng.integers(-3, 4)
    canvas[top:top + gh, left:left + gw] = np.maximum(
        canvas[top:top + gh, left:left + gw], glyph)
    canvas = ndimage.gaussian_filter(canvas, sigma=rng.uniform(0.4, 0.9))
    canvas += rng.uniform(0.0, 0.08, size=canvas.shape)
    return np.clip(canvas, 0.0, 1.0)[None]


def _radial_grid(cx: float, cy: float):
    ys, xs = np.mgrid[0:SIDE, 0:SIDE].astype(np.float64)
    return xs - cx, ys - cy


def _blob_image(malignant: bool, rng: np.random.Generator) -> np.ndarray:
    # both classes share the same intensity range so the label depends on
    # boundary irregularity and faint texture, not a brightness shortcut
    cx = SIDE / 2 + rng.uniform(-3, 3)
    cy = SIDE / 2 + rng.uniform(-3, 3)
    dx, dy = _radial_grid(cx, cy)
    r = np.hypot(dx, dy)
    amp = rng.uniform(0.5, 0.72)
    if malignant:
        theta = np.arctan2(dy, dx)
        lobes = sum(rng.uniform(0.6, 1.1) * np.sin(m * theta + rng.uniform(0, 2 * np.pi))
                    for m in (3, 5, 7))
        radius = rng.uniform(5.5, 7.5) + 1.5 * lobes
        body = 1.0 / (1.0 + np.exp((r - radius) / 0.8))
        texture = 0.15 * (np.sin(1.3 * dx + rng.uniform(0, 6)) *
                          np.cos(1.1 * dy + rng.uniform(0, 6)))
        img = body * (amp + texture)
    else:
        radius = rng.uniform(5.5, 7.5)
        body = 1.0 / (1.0 + np.exp((r - radius) / 1.4))
        img = body * amp
    img += rng.uniform(0.0, 0.10, size=img.shape)
    return np.clip(img, 0.0, 1.0)[None]


def _shape_templates():
    ys, xs = np.mgrid[0:SIDE, 0:SIDE].astype(np.float64)

    def disk(cx, cy):
        return (np.hypot(xs - cx, ys - cy) <= 3.2).astype(np.float64)

    def ring(cx, cy):
        d = np.hypot(xs - cx, ys - cy)
        return ((d >= 3.4) & (d <= 5.2)).astype(np.float64)

    def cross(cx, cy):
        return (((np.abs(xs - cx) <= 1) & (np.abs(ys - cy) <= 5)) |
                ((np.abs(ys - cy) <= 1) & (np.abs(xs - cx) <= 5))).astype(np.float64)

    def saltire(cx, cy):
        return ((np.abs((xs - cx) - (ys - cy)) <= 1.2) |
                (np.abs((xs - cx) + (ys - cy)) <= 1.2)) \
            .astype(np.float64) * (np.hypot(xs - cx, ys - cy) <= 5.5)

    def hbar(cx, cy):
        return ((np.abs(ys - cy) <= 1.2) & (np.abs(xs - cx) <= 6)).astype(np.float64)

    def vbar(cx, cy):
        return ((np.abs(xs - cx) <= 1.2) & (np.abs(ys - cy) <= 6)).astype(np.float64)

    def triangle(cx, cy):
        return (((ys - cy) >= -4) & ((ys - cy) <= 2) &
                (np.abs(xs - cx) <= (ys - cy + 4) * 0.8)).astype(np.float64)

    def dots(cx, cy):
        mask = np.zeros((SIDE, SIDE))
        for ox in (-3, 0, 3):
            for oy in (-3, 0, 3):
                mask = np.maximum(mask, (np.hypot(xs - cx - ox, ys - cy - oy) <= 0.9))
        return mask.astype(np.float64)

    # home centers keep shapes distinguishable while still overlapping
    return [
        (disk, (6, 6)), (ring, (20, 6)), (cross, (6, 20)), (saltire, (20, 20)),
        (hbar, (13, 10)), (vbar, (13, 17)), (triangle, (8, 13)), (dots, (20, 13)),
    ]


_SHAPES = _shape_templates()
SHAPE_LABELS = ("disk", "ring", "cross", "saltire", "hbar", "vbar", "triangle", "dots")


def _shapes_image(rng: np.random.Generator):
    canvas = np.zeros((SIDE, SIDE))
    labels = np.zeros(len(_SHAPES), dtype=np.int64)
    for i, (fn, (cx, cy)) in enumerate(_SHAPES):
        if rng.random() < 0.35:
            labels[i] = 1
            mask = fn(cx + rng.integers(-2, 3), cy + rng.integers(-2, 3))
            canvas = np.maximum(canvas, mask * rng.uniform(0.55, 1.0))
    canvas += rng.uniform(0.0, 0.08, size=canvas.shape)
    return np.clip(canvas, 0.0, 1.0)[None], labels


def _build(name, task, k, maker, sizes, seed) -> Dataset:
    splits = {}
    for split_name, n in sizes.items():
        rng = numpy_generator(seed, "dataset", name, split_name)
        images, labels = [], []
        for _ in range(n):
            img, lab = maker(rng)
            images.append(img)
            labels.append(lab)
        ids = tuple(f"{name}-{split_name}-{i:05d}" for i in range(n))
        values = np.array(labels)
        lb = (LabelBatch.single(values, k) if task is Task.SINGLE_LABEL
              else LabelBatch.multi(values, k))
        splits[split_name] = Split(
            images=ImageBatch(data=np.stack(images), ids=ids), labels=lb)
    return Dataset(name=name, task=task, k=k, splits=splits)


def make_blobs(seed: int = 0, n_train: int = 800, n_val: int = 200,
               n_test: int = 200) -> Dataset:
    def maker(rng):
        label = int(rng.random() < 0.5)
        return _blob_image(bool(label), rng), label

    return _build("blobs", Task.SINGLE_LABEL, 2, maker,
                  {"train": n_train, "val": n_val, "test": n_test}, seed)


def make_digits(seed: int = 0, n_train: int = 3500, n_val: int = 500,
                n_test: int = 500) -> Dataset:
    def maker(rng):
        digit = int(rng.integers(0, 10))
        return _digit_image(digit, rng), digit

    return _build("digits", Task.SINGLE_LABEL, 10, maker,
                  {"train": n_train, "val": n_val, "test": n_test}, seed)


def make_shapes(seed: int = 0, n_train: int = 1500, n_val: int = 300,
                n_test: int = 300) -> Dataset:
    def maker(rng):
        return _shapes_image(rng)

    return _build("shapes", Task.MULTI_LABEL, len(_SHAPES), maker,
                  {"train": n_train, "val": n_val, "test": n_test}, seed)


TOY_DATASETS = {"blobs": make_blobs, "digits": make_digits, "shapes": make_shapes}


def make_toy_dataset(name: str, seed: int = 0, **sizes) -> Dataset:
    if name not in TOY_DATASETS:
        raise ContractError(f"unknown toy dataset {name!r}; known: {sorted(TOY_DATASETS)}")
    return TOY_DATASETS[name](seed=seed, **sizes)
