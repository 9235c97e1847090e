from .budget import (
    BALL_TOL,
    AdversarialBatch,
    AttackBudget,
    AttackMode,
    load_adversarial_images,
    make_adversarial_batch,
    save_adversarial_batch,
)
from .gap import (
    GapEpochRecord,
    GapTrainConfig,
    PerturbationGenerator,
    build_generator,
    gap_perturb,
    scale_perturbation,
    train_gap_generator,
)
from .pgd import clip_to_ball, fgsm_attack, pgd_attack, pgd_perturb

__all__ = [
    "AttackBudget", "AttackMode", "AdversarialBatch", "BALL_TOL",
    "make_adversarial_batch", "save_adversarial_batch", "load_adversarial_images",
    "clip_to_ball", "pgd_attack", "pgd_perturb", "fgsm_attack",
    "PerturbationGenerator", "build_generator", "scale_perturbation",
    "gap_perturb", "train_gap_generator", "GapTrainConfig", "GapEpochRecord",
]
