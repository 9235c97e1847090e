from .batch import DTYPE, ImageBatch, LabelBatch, Task
from .classifier import (
    Classifier,
    loss_and_input_grad,
    predict_labels,
    predict_proba,
)
from .dataset import Dataset, Split, load_dataset, save_dataset
from .losses import (
    PROB_FLOOR,
    LossKind,
    LossSpec,
    batch_loss,
    default_loss,
    kl_divergence,
    kl_divergence_rows,
    neg_log_true_prob,
    one_hot,
    per_example_loss,
)
from .zoo import ZOO_ARCHS, build_classifier

__all__ = [
    "DTYPE", "ImageBatch", "LabelBatch", "Task",
    "Classifier", "predict_proba", "predict_labels", "loss_and_input_grad",
    "Dataset", "Split", "save_dataset", "load_dataset",
    "PROB_FLOOR", "LossKind", "LossSpec", "one_hot", "kl_divergence",
    "kl_divergence_rows", "neg_log_true_prob", "batch_loss", "per_example_loss",
    "default_loss", "build_classifier", "ZOO_ARCHS",
]
