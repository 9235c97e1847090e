from .experiment import (
    DEFAULTS,
    PHASES,
    RunRecord,
    config_hash,
    load_config,
    load_run_record,
    validate_config,
)
from .report import emit_report, rescale_for_display
from .runner import run_experiment, train_zoo_model
from .toydata import TOY_DATASETS, make_blobs, make_digits, make_shapes, make_toy_dataset

__all__ = [
    "PHASES", "DEFAULTS", "validate_config", "load_config", "config_hash",
    "RunRecord", "load_run_record", "run_experiment", "train_zoo_model",
    "emit_report", "rescale_for_display",
    "TOY_DATASETS", "make_toy_dataset", "make_blobs", "make_digits", "make_shapes",
]
