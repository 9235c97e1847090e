"""PGD / FGSM: projection contracts, closed-form and brute-force oracles."""

import itertools

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from advbench.attacks import (
    AttackBudget,
    AttackMode,
    clip_to_ball,
    fgsm_attack,
    pgd_attack,
    pgd_perturb,
)
from advbench.core import (
    ImageBatch,
    LabelBatch,
    build_classifier,
    default_loss,
    loss_and_input_grad,
)
from advbench.core.losses import batch_loss
from advbench.errors import ContractError


def _linear_model(weights, k=2, bias=None):
    d = len(weights)
    model = build_classifier("linear", k=k, input_shape=(1, 1, d), seed=0)
    with torch.no_grad():
        model.net.fc.weight.zero_()
        model.net.fc.weight[0] = torch.tensor(weights, dtype=torch.float64)
        model.net.fc.bias.zero_()
        if bias is not None:
            model.net.fc.bias[0] = bias
    return model


class TestClipToBall:
    def test_identity(self, tiny_images):
        out = clip_to_ball(tiny_images, tiny_images, 0.05)
        assert torch.equal(out.data, tiny_images.data)

    def test_forced_projection(self):
        center = torch.full((1, 1, 1, 1), 0.5, dtype=torch.float64)
        candidate = torch.full((1, 1, 1, 1), 0.6, dtype=torch.float64)
        out = clip_to_ball(candidate, center, 2.0 / 255.0)
        assert float(out) == pytest.approx(0.5 + 2.0 / 255.0, abs=1e-12)

    def test_range_floor_binds(self):
        center = torch.zeros(1, 1, 1, 1, dtype=torch.float64)
        candidate = torch.full((1, 1, 1, 1), -0.1, dtype=torch.float64)
        assert float(clip_to_ball(candidate, center, 0.3)) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            clip_to_ball(torch.zeros(1, 1, 2, 2), torch.zeros(1, 1, 3, 3), 0.1)

    @given(st.floats(0.0, 0.5), st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_always_inside_ball_and_range(self, eps, seed):
        gen = torch.Generator().manual_seed(seed)
        center = torch.rand(2, 1, 4, 4, dtype=torch.float64, generator=gen)
        candidate = center + torch.randn(2, 1, 4, 4, dtype=torch.float64, generator=gen)
        out = clip_to_ball(candidate, center, eps)
        assert float((out - center).abs().max()) <= eps + 1e-12
        assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0


class TestPgdBasics:
    def test_zero_budget_bit_exact(self, tiny_model, tiny_images):
        y = LabelBatch.single([0, 1, 2, 3, 4, 5], 10)
        budget = AttackBudget(epsilon=0.0, steps=5, random_init=False)
        adv = pgd_attack(tiny_model, tiny_images, y, budget)
        assert torch.equal(adv.perturbed.data, tiny_images.data)
        assert float(adv.success.to(torch.float64).mean()) == 0.0

    def test_fgsm_equals_single_step_pgd(self, tiny_model, tiny_images):
        y = LabelBatch.single([1, 2, 3, 4, 5, 6], 10)
        f = fgsm_attack(tiny_model, tiny_images, y, 0.03)
        p = pgd_attack(tiny_model, tiny_images, y,
                       AttackBudget(epsilon=0.03, alpha=0.03, steps=1,
                                    random_init=False))
        assert torch.equal(f.perturbed.data, p.perturbed.data)

    def test_fgsm_zero_epsilon_identity(self, tiny_model, tiny_images):
        y = LabelBatch.single([0] * 6, 10)
        assert torch.equal(fgsm_attack(tiny_model, tiny_images, y, 0.0).perturbed.data,
                           tiny_images.data)

    def test_single_step_matches_closed_form(self):
        # linear logistic model: one PGD step is x + alpha*sign((p-y)^T W)
        model = _linear_model([0.6, -0.4, 0.2, -0.1])
        gen = torch.Generator().manual_seed(8)
        x = ImageBatch.from_array(
            0.25 + 0.5 * torch.rand(3, 1, 1, 4, dtype=torch.float64, generator=gen))
        y = LabelBatch.single([0, 1, 0], 2)
        _, grad = loss_and_input_grad(model, x, y)
        expected = torch.clamp(x.data + 0.02 * grad.sign(), 0.0, 1.0)
        adv = pgd_attack(model, x, y,
                         AttackBudget(epsilon=0.02, alpha=0.02, steps=1,
                                      random_init=False))
        assert torch.equal(adv.perturbed.data, expected)

    def test_ball_and_range_invariants(self, tiny_model, tiny_images):
        y = LabelBatch.single([0, 1, 2, 3, 4, 5], 10)
        budget = AttackBudget(epsilon=0.07, steps=4, random_init=True)
        adv = pgd_attack(tiny_model, tiny_images, y, budget, seed=11)
        assert adv.max_deviation <= 0.07 + 1e-7
        assert float(adv.perturbed.data.min()) >= 0.0
        assert float(adv.perturbed.data.max()) <= 1.0
        assert torch.equal(adv.delta, adv.perturbed.data - adv.original.data)

    def test_targeted_mode_descends_to_target(self, natural_digits, digits_dataset):
        model, _ = natural_digits
        test = digits_dataset.split("test")
        x = test.images.select(range(16))
        target = LabelBatch.single([3] * 16, 10)
        budget = AttackBudget(epsilon=0.1, alpha=0.025, steps=10,
                              random_init=True, mode=AttackMode.TARGETED)
        adv = pgd_attack(model, x, target, budget, seed=13)
        assert float(adv.success.to(torch.float64).mean()) >= 0.75

    def test_zero_gradient_batch_completes(self):
        model = _linear_model([0.0, 0.0, 0.0, 0.0])
        x = ImageBatch.from_array(torch.full((2, 1, 1, 4), 0.5, dtype=torch.float64))
        y = LabelBatch.single([0, 1], 2)
        adv = pgd_attack(model, x, y, AttackBudget(epsilon=0.1, alpha=0.05, steps=3))
        assert torch.equal(adv.perturbed.data, x.data)


class TestPgdOracles:
    def test_corner_enumeration_oracle(self):
        # the linear-loss maximum over the clipped box sits at a corner
        rng = np.random.default_rng(3)
        eps = 0.1
        for _ in range(20):
            w = rng.normal(size=4)
            model = _linear_model(w.tolist())
            x0 = rng.uniform(0.2, 0.8, size=4)
            x = ImageBatch.from_array(torch.tensor(x0, dtype=torch.float64).view(1, 1, 1, 4))
            y = LabelBatch.single([int(rng.integers(0, 2))], 2)
            spec = default_loss(model.task)
            budget = AttackBudget(epsilon=eps, alpha=0.025, steps=10, random_init=False)
            adv = pgd_attack(model, x, y, budget, loss=spec)
            with torch.no_grad():
                achieved = float(batch_loss(model.logits(adv.perturbed.data), y, spec))
                best = -np.inf
                for corner in itertools.product((-eps, eps), repeat=4):
                    cand = np.clip(x0 + np.asarray(corner), 0.0, 1.0)
                    t = torch.tensor(cand, dtype=torch.float64).view(1, 1, 1, 4)
                    best = max(best, float(batch_loss(model.logits(t), y, spec)))
            assert achieved >= 0.99 * best

    def test_exact_ascent_on_linear_model(self):
        # non-target PGD never decreases the attacked loss between iterates
        model = _linear_model([0.8, -0.5, 0.3, 0.9])
        gen = torch.Generator().manual_seed(5)
        x = ImageBatch.from_array(
            0.3 + 0.4 * torch.rand(4, 1, 1, 4, dtype=torch.float64, generator=gen))
        y = LabelBatch.single([0, 1, 0, 1], 2)
        spec = default_loss(model.task)
        budget_proto = dict(epsilon=0.08, alpha=0.02, random_init=False)
        losses = []
        for steps in range(0, 5):
            adv = pgd_perturb(model, x.data, y,
                              AttackBudget(steps=steps, **budget_proto), spec)
            with torch.no_grad():
                losses.append(float(batch_loss(model.logits(adv), y, spec)))
        assert all(b >= a - 1e-12 for a, b in zip(losses, losses[1:]))

    def test_monotone_in_epsilon_on_linear_model(self):
        model = _linear_model([0.8, -0.5, 0.3, 0.9])
        gen = torch.Generator().manual_seed(6)
        x = ImageBatch.from_array(
            0.3 + 0.4 * torch.rand(4, 1, 1, 4, dtype=torch.float64, generator=gen))
        y = LabelBatch.single([0, 1, 0, 1], 2)
        spec = default_loss(model.task)
        losses = []
        for eps in (0.0, 0.02, 0.04, 0.06, 0.08, 0.1):
            adv = pgd_perturb(model, x.data, y,
                              AttackBudget(epsilon=eps, alpha=eps / 4 if eps else 0.0,
                                           steps=10, random_init=False), spec)
            with torch.no_grad():
                losses.append(float(batch_loss(model.logits(adv), y, spec)))
        assert all(b >= a - 1e-12 for a, b in zip(losses, losses[1:]))


class TestBudgetValidation:
    def test_negative_epsilon(self):
        with pytest.raises(ContractError):
            AttackBudget(epsilon=-0.1)

    def test_negative_steps(self):
        with pytest.raises(ContractError):
            AttackBudget(epsilon=0.1, steps=-1)

    def test_alpha_defaults_to_quarter_epsilon(self):
        assert AttackBudget(epsilon=0.2).resolved_alpha == pytest.approx(0.05)
