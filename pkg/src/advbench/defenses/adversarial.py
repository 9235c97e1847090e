"""Defense trainers: natural, fixed-budget adversarial, randomized-budget
adversarial (MPAdvT), and misclassification-aware adversarial (MAAdvT).

All trainers share one SGD-with-momentum loop and separate RNG streams for
shuffling, attack noise, hyperparameter draws, and evaluation, so a defense
with a zero budget (or a forced clean branch) walks the exact same parameter
trajectory as natural training under the same seed.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import torch
import torch.nn.functional as F

from ..attacks.budget import AttackBudget
from ..attacks.pgd import pgd_perturb
from ..core.batch import Task
from ..core.classifier import Classifier, predict_labels
from ..core.dataset import Dataset, Split
from ..core.losses import (
    PROB_FLOOR,
    default_loss,
    kl_divergence_rows,
    neg_log_true_prob,
    per_example_loss,
)
from ..errors import ContractError, NumericError, TaskMismatchError
from ..seeding import torch_generator
from .config import EpochRecord, TrainConfig, TrainLog

_LOG_FLOOR = math.log(PROB_FLOOR)


# ---- MAAdvT algebra ---------------------------------------------------------


def maadvt_regularizer(clean_probs, adv_probs, y) -> torch.Tensor:
    """Per-example stability term: KL(clean || adv) * (1 - p_clean[true]).

    Large for misclassified examples, zero when the clean output is already
    fully confident on the true class or when the outputs coincide.
    """
    cp = torch.as_tensor(clean_probs, dtype=torch.float64)
    ap = torch.as_tensor(adv_probs, dtype=torch.float64)
    y_idx = torch.as_tensor(y.values if hasattr(y, "values") else y).to(torch.int64)
    if cp.dim() == 1:
        cp, ap, y_idx = cp.unsqueeze(0), ap.unsqueeze(0), y_idx.reshape(1)
    kl = kl_divergence_rows(cp, ap)
    weight = 1.0 - cp.gather(1, y_idx.view(-1, 1)).squeeze(1)
    return kl * weight


def maadvt_loss(clean_probs, adv_probs, y, lam: float) -> torch.Tensor:
    """Mean of CE(adv, y) + lambda * R_i over the batch (probability domain)."""
    if lam < 0:
        raise ContractError(f"lambda must be >= 0, got {lam}")
    ap = torch.as_tensor(adv_probs, dtype=torch.float64)
    y_idx = torch.as_tensor(y.values if hasattr(y, "values") else y).to(torch.int64)
    if ap.dim() == 1:
        ap = ap.unsqueeze(0)
        y_idx = y_idx.reshape(1)
    ce = neg_log_true_prob(ap, y_idx)
    reg = maadvt_regularizer(clean_probs, adv_probs, y)
    return (ce + lam * reg).mean()


# ---- shared training loop ---------------------------------------------------


def _evaluate_accuracy(model: Classifier, split: Split, limit: int) -> float:
    images = split.images.data[:limit]
    labels = split.labels.values[:limit]
    preds = predict_labels(model, images)
    if model.task is Task.SINGLE_LABEL:
        return float((preds == labels).to(torch.float64).mean())
    return float((preds == labels).all(dim=1).to(torch.float64).mean())


def evaluate_robust_accuracy(model: Classifier, split: Split,
                             budget: AttackBudget, limit: Optional[int] = None,
                             rng: Optional[torch.Generator] = None,
                             batch_size: int = 128) -> float:
    """Accuracy on PGD-perturbed images at the given budget."""
    n = len(split) if limit is None else min(limit, len(split))
    spec = default_loss(model.task)
    correct, seen = 0.0, 0
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        x = split.images.data[start:stop]
        y = split.labels.select(range(start, stop))
        x_adv = pgd_perturb(model, x, y, budget, spec, rng)
        preds = predict_labels(model, x_adv)
        if model.task is Task.SINGLE_LABEL:
            correct += float((preds == y.values).sum())
        else:
            correct += float((preds == y.values).all(dim=1).sum())
        seen += len(y)
    return correct / seen if seen else 0.0


def _train_loop(model: Classifier, data: Dataset, cfg: TrainConfig, method: str,
                batch_fn: Callable) -> TrainLog:
    """Run epochs of minibatch SGD; batch_fn produces (loss, ce, reg, draw)."""
    train = data.split("train")
    val = data.split("val") if "val" in data.splits else train
    opt = torch.optim.SGD(model.net.parameters(), lr=cfg.lr, momentum=cfg.momentum)
    shuffle_rng = torch_generator(cfg.seed, "train", "shuffle")
    eval_rng = torch_generator(cfg.seed, "train", "eval")
    log = TrainLog(method=method)
    n = len(train)
    for epoch in range(cfg.outer_epochs):
        order = torch.randperm(n, generator=shuffle_rng)
        ce_sum, reg_sum, seen = 0.0, 0.0, 0
        draws = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x = train.images.data[idx]
            y = train.labels.select(idx.tolist())
            loss, ce, reg, draw = batch_fn(model, x, y)
            if not torch.isfinite(loss):
                raise NumericError(
                    f"{method}: non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            ce_sum += ce * len(idx)
            reg_sum += reg * len(idx)
            seen += len(idx)
            if draw is not None:
                draws.append(draw)
        log.append(EpochRecord(
            epoch=epoch,
            clean_accuracy=_evaluate_accuracy(model, val, cfg.eval_max_images),
            robust_accuracy=evaluate_robust_accuracy(
                model, val, cfg.resolved_eval_budget(), cfg.eval_max_images, eval_rng
            ),
            ce_loss=ce_sum / seen,
            reg_loss=reg_sum / seen,
            draws=draws,
        ))
    return log


# ---- trainers ---------------------------------------------------------------


def natural_training(model: Classifier, data: Dataset, cfg: TrainConfig):
    """Plain minibatch training on clean images."""
    spec = default_loss(model.task)

    def batch_fn(model, x, y):
        loss = per_example_loss(model.logits(x), y, spec).mean()
        return loss, float(loss.detach()), 0.0, None

    return model, _train_loop(model, data, cfg, "natural", batch_fn)


def standard_adversarial_training(model: Classifier, data: Dataset,
                                  cfg: TrainConfig):
    """Min-max training at a fixed budget: inner PGD, outer minimization."""
    epsilon = cfg.fixed_epsilon()
    steps = cfg.fixed_steps()
    alpha = cfg.alpha_inner if cfg.alpha_inner is not None else epsilon / 4.0
    budget = AttackBudget(epsilon=epsilon, alpha=alpha, steps=steps,
                          random_init=True)
    spec = default_loss(model.task)
    attack_rng = torch_generator(cfg.seed, "train", "attack")

    def batch_fn(model, x, y):
        x_adv = pgd_perturb(model, x, y, budget, spec, attack_rng)
        loss = per_example_loss(model.logits(x_adv), y, spec).mean()
        return loss, float(loss.detach()), 0.0, None

    return model, _train_loop(model, data, cfg, "standard_at", batch_fn)


def mpadvt_train(model: Classifier, data: Dataset, cfg: TrainConfig):
    """Randomized-budget adversarial training.

    Per minibatch, draw p ~ U(0,1), epsilon ~ U(range), steps ~ U(range)
    rounded to the nearest integer. When p >= branch_threshold the whole batch
    is perturbed (uniform init inside the ball, then clipped sign-gradient
    steps); otherwise it passes through clean. One parameter update per batch.
    """
    eps_lo, eps_hi = cfg.epsilon_range()
    step_lo, step_hi = cfg.steps_range()
    spec = default_loss(model.task)
    attack_rng = torch_generator(cfg.seed, "train", "attack")
    draw_rng = torch_generator(cfg.seed, "train", "draws")

    def batch_fn(model, x, y):
        u = torch.rand(3, generator=draw_rng, dtype=torch.float64)
        p = float(u[0])
        eps = eps_lo + float(u[1]) * (eps_hi - eps_lo)
        t_i = int(math.floor(step_lo + float(u[2]) * (step_hi - step_lo) + 0.5))
        perturbed = p >= cfg.branch_threshold
        if perturbed and eps > 0:
            alpha = cfg.alpha_inner if cfg.alpha_inner is not None else eps / 4.0
            budget = AttackBudget(epsilon=eps, alpha=alpha, steps=t_i,
                                  random_init=True)
            x_in = pgd_perturb(model, x, y, budget, spec, attack_rng)
        else:
            x_in = x
        loss = per_example_loss(model.logits(x_in), y, spec).mean()
        draw = {"p": p, "epsilon": eps, "steps": t_i, "perturbed": bool(perturbed)}
        return loss, float(loss.detach()), 0.0, draw

    return model, _train_loop(model, data, cfg, "mpadvt", batch_fn)


def maadvt_train(model: Classifier, data: Dataset, cfg: TrainConfig):
    """Adversarial training with the misclassification-aware stability term.

    Single-label only. Per batch: perturb with fixed-budget PGD, then minimize
    CE(adv, y) + lambda * KL(clean || adv) * (1 - p_clean[true]); the clean
    probabilities are recomputed with the current parameters each step.
    """
    if model.task is not Task.SINGLE_LABEL:
        raise TaskMismatchError("misclassification-aware training is single-label only")
    epsilon = cfg.fixed_epsilon()
    steps = cfg.fixed_steps()
    alpha = cfg.alpha_inner if cfg.alpha_inner is not None else epsilon / 4.0
    budget = AttackBudget(epsilon=epsilon, alpha=alpha, steps=steps,
                          random_init=True)
    spec = default_loss(model.task)
    attack_rng = torch_generator(cfg.seed, "train", "attack")

    def batch_fn(model, x, y):
        x_adv = pgd_perturb(model, x, y, budget, spec, attack_rng)
        adv_logits = model.logits(x_adv)
        # same CE expression as the fixed-budget trainer so lam=0 reduces to it
        ce = per_example_loss(adv_logits, y, spec).mean()
        clean_probs = model.probabilities(model.logits(x))
        adv_probs = model.probabilities(adv_logits)
        reg = maadvt_regularizer(clean_probs, adv_probs, y).mean()
        loss = ce + cfg.lam * reg
        return loss, float(ce.detach()), float(reg.detach()), None

    return model, _train_loop(model, data, cfg, "maadvt", batch_fn)
