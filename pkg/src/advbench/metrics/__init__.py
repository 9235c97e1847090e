from .cooccurrence import (
    CooccurrenceMatrix,
    export_cooccurrence_csv,
    label_cooccurrence,
)
from .introspect import (
    SaliencyMap,
    attention_maps,
    embedding_vectors,
    export_embeddings,
    feature_maps,
    saliency_map,
)
from .rates import (
    EvaluationReport,
    accuracy,
    auc,
    discrete_predictions,
    fooling_ratio,
)

__all__ = [
    "accuracy", "auc", "fooling_ratio", "discrete_predictions",
    "EvaluationReport", "CooccurrenceMatrix", "label_cooccurrence",
    "export_cooccurrence_csv", "SaliencyMap", "saliency_map", "feature_maps",
    "attention_maps", "embedding_vectors", "export_embeddings",
]
