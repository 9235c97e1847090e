from .flip import (
    benchmark_flip_probability,
    default_fp_mode,
    flip_probability,
    read_predictions_csv,
    relative_flip_probability,
    sequence_predictions,
    write_predictions_csv,
)
from .perturb import (
    PERTURBATION_TYPES,
    SEVERITY_TABLE,
    PerturbationType,
    apply_perturbation,
    resolve_type,
)
from .sequence import (
    DEFAULT_FRAMES,
    BenchmarkManifest,
    PerturbationSequence,
    build_benchmark,
    generate_sequence,
    load_benchmark,
    verify_benchmark,
)

__all__ = [
    "PerturbationType", "PERTURBATION_TYPES", "SEVERITY_TABLE",
    "apply_perturbation", "resolve_type",
    "PerturbationSequence", "generate_sequence", "BenchmarkManifest",
    "build_benchmark", "load_benchmark", "verify_benchmark", "DEFAULT_FRAMES",
    "flip_probability", "relative_flip_probability", "default_fp_mode",
    "sequence_predictions", "benchmark_flip_probability",
    "write_predictions_csv", "read_predictions_csv",
]
