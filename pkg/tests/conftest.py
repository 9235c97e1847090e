"""Shared fixtures. Session-scoped trained models are expensive and are shared
across the acceptance criteria; unit tests use the tiny fixtures only.
"""

import numpy as np
import pytest
import torch

from advbench.core import ImageBatch, LabelBatch, build_classifier
from advbench.defenses import TrainConfig, natural_training
from advbench.harness import make_blobs, make_digits, make_shapes

ROOT_SEED = 20240811


def criterion_line(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[{status}] {name}" + (f" :: {detail}" if detail else ""))
    assert passed, f"{name}: {detail}"


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(ROOT_SEED)


@pytest.fixture(scope="session")
def tiny_images():
    gen = torch.Generator().manual_seed(5)
    data = torch.rand(6, 1, 28, 28, dtype=torch.float64, generator=gen)
    return ImageBatch.from_array(data)


@pytest.fixture(scope="session")
def tiny_model():
    return build_classifier("small_cnn", k=10, seed=3)


@pytest.fixture(scope="session")
def tiny_attn_model():
    return build_classifier("attn_cnn", k=2, seed=3)


@pytest.fixture(scope="session")
def tiny_multilabel_model():
    return build_classifier("multilabel_cnn", k=8, seed=3)


@pytest.fixture(scope="session")
def small_blobs():
    return make_blobs(seed=21, n_train=96, n_val=48, n_test=48)


@pytest.fixture(scope="session")
def small_shapes():
    return make_shapes(seed=22, n_train=96, n_val=48, n_test=48)


# ---- heavy, shared across acceptance criteria --------------------------------


@pytest.fixture(scope="session")
def digits_dataset():
    return make_digits(seed=7)


@pytest.fixture(scope="session")
def blobs_dataset():
    return make_blobs(seed=7)


@pytest.fixture(scope="session")
def natural_digits(digits_dataset):
    model = build_classifier("small_cnn", k=10, seed=0)
    cfg = TrainConfig(outer_epochs=10, batch_size=64, lr=0.08,
                      epsilon=0.0, inner_steps=0, seed=1, eval_max_images=96)
    model, log = natural_training(model, digits_dataset, cfg)
    return model, log


@pytest.fixture(scope="session")
def natural_blobs(blobs_dataset):
    model = build_classifier("small_cnn", k=2, seed=0)
    cfg = TrainConfig(outer_epochs=16, batch_size=64, lr=0.05,
                      epsilon=0.0, inner_steps=0, seed=1, eval_max_images=96)
    model, log = natural_training(model, blobs_dataset, cfg)
    return model, log
