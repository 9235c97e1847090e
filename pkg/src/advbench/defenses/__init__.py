from .adversarial import (
    evaluate_robust_accuracy,
    maadvt_loss,
    maadvt_regularizer,
    maadvt_train,
    mpadvt_train,
    natural_training,
    standard_adversarial_training,
)
from .config import DEFAULT_EVAL_BUDGET, EpochRecord, TrainConfig, TrainLog

__all__ = [
    "TrainConfig", "TrainLog", "EpochRecord", "DEFAULT_EVAL_BUDGET",
    "natural_training", "standard_adversarial_training", "mpadvt_train",
    "maadvt_train", "maadvt_regularizer", "maadvt_loss",
    "evaluate_robust_accuracy",
]
