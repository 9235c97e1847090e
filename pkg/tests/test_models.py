"""Classifier contract: probabilities, input gradients vs finite differences,
taps, determinism, checkpoints.
"""

import numpy as np
import pytest
import torch

from advbench.core import (
    ImageBatch,
    LabelBatch,
    LossSpec,
    Task,
    build_classifier,
    default_loss,
    loss_and_input_grad,
    predict_labels,
    predict_proba,
)
from advbench.core.losses import batch_loss, per_example_loss
from advbench.errors import ContractError, NumericError


def _fd_gradient(model, x, y, spec, coords, h=1e-4):
    """Central finite differences of the batch-mean loss at chosen pixels."""
    grads = {}
    with torch.no_grad():
        for coord in coords:
            for sign in (+1, -1):
                data = x.data.clone()
                data[coord] += sign * h
                data.clamp_(0.0, 1.0)
                loss = float(batch_loss(model.logits(data), y, spec))
                grads.setdefault(coord, 0.0)
                grads[coord] += sign * loss
    return {c: v / (2 * h) for c, v in grads.items()}


def _sample_coords(shape, rng, n):
    coords = set()
    while len(coords) < n:
        coords.add(tuple(int(rng.integers(0, s)) for s in shape))
    return sorted(coords)


class TestPredictProba:
    def test_zeroed_head_gives_uniform(self, tiny_images):
        model = build_classifier("small_cnn", k=10, seed=1)
        with torch.no_grad():
            model.net.fc2.weight.zero_()
            model.net.fc2.bias.zero_()
        probs = predict_proba(model, tiny_images)
        assert torch.allclose(probs, torch.full_like(probs, 0.1), atol=1e-12)

    def test_rows_sum_to_one(self, tiny_model, tiny_images):
        probs = predict_proba(tiny_model, tiny_images)
        assert torch.allclose(probs.sum(dim=1),
                              torch.ones(len(tiny_images), dtype=torch.float64),
                              atol=1e-6)

    def test_multilabel_entries_in_unit_interval(self, tiny_multilabel_model, tiny_images):
        probs = predict_proba(tiny_multilabel_model, tiny_images)
        assert probs.min() >= 0.0 and probs.max() <= 1.0

    def test_two_pixel_linear_logistic(self):
        # w = (1, -1), b = 0 on input (0.8, 0.2): margin 0.6 between the two
        # class logits, so p(class 0) = 1 / (1 + e^-0.6)
        model = build_classifier("linear", k=2, input_shape=(1, 1, 2), seed=0)
        with torch.no_grad():
            model.net.fc.weight.copy_(torch.tensor([[1.0, -1.0], [0.0, 0.0]],
                                                   dtype=torch.float64))
            model.net.fc.bias.zero_()
        x = ImageBatch.from_array(torch.tensor([[[[0.8, 0.2]]]], dtype=torch.float64))
        p0 = float(predict_proba(model, x)[0, 0])
        assert p0 == pytest.approx(1.0 / (1.0 + np.exp(-0.6)), abs=1e-9)
        assert p0 == pytest.approx(0.6457, abs=2e-4)

    def test_shape_mismatch_rejected(self, tiny_model):
        bad = torch.rand(2, 1, 14, 14, dtype=torch.float64)
        with pytest.raises(ContractError):
            predict_proba(tiny_model, bad)

    def test_forward_deterministic(self, tiny_model, tiny_images):
        a = predict_proba(tiny_model, tiny_images)
        b = predict_proba(tiny_model, tiny_images)
        assert torch.equal(a, b)


class TestInputGradients:
    @pytest.mark.parametrize("arch,k", [("small_cnn", 10), ("attn_cnn", 2),
                                        ("multilabel_cnn", 8)])
    def test_gradient_matches_finite_differences(self, arch, k, tiny_images):
        model = build_classifier(arch, k=k, seed=9)
        rng = np.random.default_rng(17)
        x = tiny_images.select([0, 1])
        if model.task is Task.SINGLE_LABEL:
            y = LabelBatch.single(rng.integers(0, k, size=2), k)
        else:
            y = LabelBatch.multi(rng.integers(0, 2, size=(2, k)), k)
        spec = default_loss(model.task)
        _, grad = loss_and_input_grad(model, x, y, spec)
        # keep probe pixels away from the clamp boundary
        interior = torch.clamp(x.data, 0.05, 0.95)
        x = x.with_data(interior)
        _, grad = loss_and_input_grad(model, x, y, spec)
        coords = _sample_coords(x.data.shape, rng, 10)
        fd = _fd_gradient(model, x, y, spec, coords)
        for coord, fd_value in fd.items():
            analytic = float(grad[coord])
            denom = max(abs(fd_value), abs(analytic), 1e-6)
            assert abs(analytic - fd_value) / denom <= 1e-3

    def test_masked_pixel_has_zero_gradient(self):
        model = build_classifier("linear", k=3, input_shape=(1, 2, 2), seed=0)
        with torch.no_grad():
            model.net.fc.weight[:, 0] = 0.0   # output independent of pixel 0
        x = ImageBatch.from_array(torch.rand(3, 1, 2, 2, dtype=torch.float64,
                                             generator=torch.Generator().manual_seed(2)))
        y = LabelBatch.single([0, 1, 2], 3)
        _, grad = loss_and_input_grad(model, x, y)
        assert torch.all(grad[:, 0, 0, 0] == 0.0)

    def test_logistic_gradient_is_weighted_w(self):
        # with class-1 row zeroed, grad = (p0 - y0) * w0 per example
        model = build_classifier("linear", k=2, input_shape=(1, 1, 4), seed=0)
        with torch.no_grad():
            w = torch.tensor([0.7, -0.3, 0.2, 0.5], dtype=torch.float64)
            model.net.fc.weight[0] = w
            model.net.fc.weight[1] = 0.0
            model.net.fc.bias.zero_()
        x = ImageBatch.from_array(torch.rand(1, 1, 1, 4, dtype=torch.float64,
                                             generator=torch.Generator().manual_seed(4)))
        y = LabelBatch.single([0], 2)
        probs = predict_proba(model, x)
        _, grad = loss_and_input_grad(model, x, y)
        expected = (float(probs[0, 0]) - 1.0) * w
        assert torch.allclose(grad.flatten(), expected, atol=1e-12)

    def test_nonfinite_loss_names_ids(self, tiny_model):
        x = ImageBatch.from_array(
            torch.rand(2, 1, 28, 28, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(0)),
            ids=("good", "bad"))
        y = LabelBatch.single([0, 1], 10)
        with torch.no_grad():
            tiny_model_bad = build_classifier("small_cnn", k=10, seed=3)
            tiny_model_bad.net.fc2.weight.fill_(float("nan"))
        with pytest.raises(NumericError) as err:
            loss_and_input_grad(tiny_model_bad, x, y)
        assert "good" in str(err.value) or "bad" in str(err.value)


class TestTapsAndPersistence:
    def test_taps_listed(self, tiny_model, tiny_attn_model):
        assert set(tiny_model.taps) == {"conv1", "conv2", "embedding"}
        assert set(tiny_attn_model.attention_taps) == {"attention1", "attention2"}

    def test_unknown_tap_rejected(self, tiny_model, tiny_images):
        with pytest.raises(ContractError):
            tiny_model.forward_with_taps(tiny_images.data, ["nope"])

    def test_checkpoint_round_trip(self, tmp_path, tiny_model, tiny_images):
        path = tmp_path / "model.pt"
        tiny_model.save(path)
        loaded = type(tiny_model).load(path)
        assert loaded.parameter_hash() == tiny_model.parameter_hash()
        assert torch.equal(predict_proba(loaded, tiny_images),
                           predict_proba(tiny_model, tiny_images))

    def test_predict_labels_tie_break(self):
        # uniform rows argmax to index 0 (lowest-index tie-break)
        model = build_classifier("small_cnn", k=4, seed=1)
        with torch.no_grad():
            model.net.fc2.weight.zero_()
            model.net.fc2.bias.zero_()
        x = ImageBatch.from_array(torch.rand(3, 1, 28, 28, dtype=torch.float64,
                                             generator=torch.Generator().manual_seed(1)))
        assert predict_labels(model, x).tolist() == [0, 0, 0]
