"""Iterative sign-gradient attacks in the L-infinity ball.

The non-target attack starts from an optional uniform draw inside the ball,
then repeats: step along sign(grad_x loss) and re-project onto the intersection
of the epsilon-ball around the source image and the valid range [0, 1]. The
gradient is evaluated at the current iterate. The targeted variant descends
toward the target labels instead.
"""

from __future__ import annotations

from typing import Optional

import torch

from ..core.batch import ImageBatch, LabelBatch
from ..core.classifier import Classifier
from ..core.losses import LossSpec, default_loss, per_example_loss
from ..errors import ContractError, NumericError
from ..seeding import torch_generator
from .budget import AdversarialBatch, AttackBudget, AttackMode, make_adversarial_batch


def clip_to_ball(candidate, center, epsilon: float):
    """Project elementwise onto [max(0, center-eps), min(1, center+eps)].

    Accepts tensors or ImageBatch (returned in kind).
    """
    cand_t = candidate.data if isinstance(candidate, ImageBatch) else candidate
    cent_t = center.data if isinstance(center, ImageBatch) else center
    if cand_t.shape != cent_t.shape:
        raise ContractError(
            f"candidate shape {tuple(cand_t.shape)} != center shape {tuple(cent_t.shape)}"
        )
    out = torch.clamp(
        torch.min(torch.max(cand_t, cent_t - epsilon), cent_t + epsilon), 0.0, 1.0
    )
    if isinstance(candidate, ImageBatch):
        return candidate.with_data(out)
    return out


def pgd_perturb(model: Classifier, x: torch.Tensor, y: LabelBatch,
                budget: AttackBudget, loss: Optional[LossSpec] = None,
                rng: Optional[torch.Generator] = None) -> torch.Tensor:
    """Core PGD loop on a raw tensor; returns the perturbed tensor.

    A zero budget returns the input unchanged without consuming any RNG, so
    training loops built on this reduce bit-exactly to natural training.
    """
    if budget.epsilon == 0.0:
        return x.clone()
    spec = loss or default_loss(model.task)
    sign = -1.0 if budget.mode is AttackMode.TARGETED else 1.0
    if budget.random_init:
        noise = torch.empty_like(x).uniform_(
            -budget.epsilon, budget.epsilon, generator=rng
        )
        x_adv = torch.clamp(x + noise, 0.0, 1.0)
    else:
        x_adv = x.clone()
    alpha = budget.resolved_alpha
    for _ in range(budget.steps):
        x_adv = x_adv.detach().requires_grad_(True)
        total = per_example_loss(model.logits(x_adv), y, spec).mean()
        if not torch.isfinite(total):
            raise NumericError("non-finite loss inside attack iteration")
        (grad,) = torch.autograd.grad(total, x_adv)
        x_adv = clip_to_ball(x_adv.detach() + sign * alpha * grad.sign(), x, budget.epsilon)
    return x_adv.detach()


def pgd_attack(model: Classifier, x: ImageBatch, y: LabelBatch,
               budget: AttackBudget, loss: Optional[LossSpec] = None,
               seed: Optional[int] = None) -> AdversarialBatch:
    """Run PGD on an image batch; y holds true labels (non-target) or targets."""
    if len(x) != len(y):
        raise ContractError(f"{len(x)} images but {len(y)} labels")
    rng = torch_generator(seed, "pgd") if seed is not None else None
    perturbed = x.with_data(pgd_perturb(model, x.data, y, budget, loss, rng))
    target = y if budget.mode is AttackMode.TARGETED else None
    return make_adversarial_batch(model, x, perturbed, budget, seed=seed, target=target)


def fgsm_attack(model: Classifier, x: ImageBatch, y: LabelBatch, epsilon: float,
                loss: Optional[LossSpec] = None) -> AdversarialBatch:
    """Single-step sign-gradient attack: PGD with steps=1, alpha=epsilon, no init."""
    budget = AttackBudget(epsilon=epsilon, alpha=epsilon, steps=1, random_init=False)
    return pgd_attack(model, x, y, budget, loss)
