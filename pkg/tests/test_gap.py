"""Perturbation-generator attack: scaling, clipping, and training contracts."""

import pytest
import torch

from advbench.attacks import (
    GapTrainConfig,
    build_generator,
    gap_perturb,
    scale_perturbation,
    train_gap_generator,
)
from advbench.core import ImageBatch, build_classifier, predict_labels
from advbench.harness import make_blobs
from advbench.metrics import fooling_ratio


class TestScalePerturbation:
    def test_shrinks_oversized(self):
        raw = torch.zeros(1, 1, 2, 2, dtype=torch.float64)
        raw[0, 0, 0, 0] = 20.0 / 255.0
        out = scale_perturbation(raw, 10.0 / 255.0)
        # multiplier is exactly 0.5
        assert float(out[0, 0, 0, 0]) == pytest.approx(10.0 / 255.0, abs=1e-15)
        assert float(out.abs().max()) <= 10.0 / 255.0

    def test_leaves_small_untouched(self):
        raw = torch.full((1, 1, 2, 2), 5.0 / 255.0, dtype=torch.float64)
        out = scale_perturbation(raw, 10.0 / 255.0)
        assert torch.equal(out, raw)

    def test_zero_passes_through(self):
        raw = torch.zeros(2, 1, 3, 3, dtype=torch.float64)
        assert torch.equal(scale_perturbation(raw, 0.1), raw)

    def test_per_image_scaling(self):
        raw = torch.zeros(2, 1, 1, 2, dtype=torch.float64)
        raw[0, 0, 0, 0] = 0.4     # needs scaling
        raw[1, 0, 0, 0] = 0.05    # already inside
        out = scale_perturbation(raw, 0.1)
        assert float(out[0].abs().max()) == pytest.approx(0.1)
        assert torch.equal(out[1], raw[1])

    def test_single_image_shape(self):
        raw = torch.full((1, 4, 4), 0.3, dtype=torch.float64)
        out = scale_perturbation(raw, 0.1)
        assert out.shape == raw.shape
        assert float(out.abs().max()) == pytest.approx(0.1)


class TestGapPerturb:
    def test_zeroed_head_is_identity(self, tiny_images):
        gen = build_generator(seed=1)
        with torch.no_grad():
            gen.head.weight.zero_()
            gen.head.bias.zero_()
        batch = gap_perturb(gen, tiny_images, 0.1)
        assert torch.equal(batch.perturbed.data, tiny_images.data)

    def test_ball_invariant_any_generator(self, tiny_images):
        for seed in (1, 2, 3):
            gen = build_generator(seed=seed)
            batch = gap_perturb(gen, tiny_images, 0.04)
            assert batch.max_deviation <= 0.04 + 1e-7
            assert float(batch.perturbed.data.min()) >= 0.0
            assert float(batch.perturbed.data.max()) <= 1.0

    def test_zero_epsilon_identity(self, tiny_images):
        gen = build_generator(seed=4)
        batch = gap_perturb(gen, tiny_images, 0.0)
        assert torch.equal(batch.perturbed.data, tiny_images.data)

    def test_output_shape_matches_input(self, tiny_images):
        gen = build_generator(seed=5)
        assert gen(tiny_images.data).shape == tiny_images.data.shape

    def test_deterministic_forward(self, tiny_images):
        gen = build_generator(seed=6)
        with torch.no_grad():
            a = gen(tiny_images.data)
            b = gen(tiny_images.data)
        assert torch.equal(a, b)


class TestGeneratorTraining:
    @pytest.fixture(scope="class")
    def trained(self):
        data = make_blobs(seed=31, n_train=160, n_val=64, n_test=64)
        model = build_classifier("small_cnn", k=2, seed=2)
        # quick natural fit so the attack target is meaningful
        from advbench.defenses import TrainConfig, natural_training

        model, _ = natural_training(model, data, TrainConfig(
            outer_epochs=8, batch_size=32, lr=0.05, epsilon=0.0, inner_steps=0,
            seed=3, eval_max_images=32))
        gen = build_generator(seed=7)
        hash_before = model.parameter_hash()
        gen, log = train_gap_generator(gen, model, data, epsilon=0.1,
                                       cfg=GapTrainConfig(epochs=5, batch_size=32,
                                                          lr=1e-3, seed=8))
        return data, model, gen, log, hash_before

    def test_objective_nonpositive_and_decreasing(self, trained):
        _, _, _, log, _ = trained
        objectives = [rec.objective for rec in log]
        assert all(obj <= 0.0 for obj in objectives)
        assert objectives[-1] < objectives[0]

    def test_classifier_untouched(self, trained):
        _, model, _, _, hash_before = trained
        assert model.parameter_hash() == hash_before

    def test_log_has_train_and_val_fooling(self, trained):
        _, _, _, log, _ = trained
        assert len(log) == 5
        assert all(0.0 <= rec.train_fooling <= 1.0 for rec in log)
        assert all(0.0 <= rec.val_fooling <= 1.0 for rec in log)

    def test_perturbations_differ_across_inputs(self, trained):
        data, _, gen, _, _ = trained
        val = data.split("val")
        x = val.images.select([0, 1])
        batch = gap_perturb(gen, x, 0.1)
        assert not torch.equal(batch.delta[0], batch.delta[1])

    def test_fooling_beats_matched_random_noise(self, trained):
        data, model, gen, log, _ = trained
        val = data.split("val")
        batch = gap_perturb(gen, val.images, 0.1, model=model)
        gap_fr = fooling_ratio(batch.clean_pred, batch.adv_pred, model.task)
        noise = (torch.rand(val.images.data.shape, dtype=torch.float64,
                            generator=torch.Generator().manual_seed(0)) * 2 - 1) * 0.1
        noisy = torch.clamp(val.images.data + noise, 0.0, 1.0)
        noise_fr = fooling_ratio(predict_labels(model, val.images.data),
                                 predict_labels(model, noisy), model.task)
        assert gap_fr > noise_fr
