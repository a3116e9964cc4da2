"""Item and feature embeddings (prod2vec-style SGNS) and similarity queries."""
from ._backend import BACKEND
from .sgns import (
    EmbeddingConfig,
    feature_sequences,
    negative_table,
    sgns_gradient,
    sgns_objective,
    train_skipgram,
    train_step,
)
from .space import EmbeddingSpace, cosine_distance, nearest_neighbors

__all__ = [
    "BACKEND",
    "EmbeddingConfig",
    "EmbeddingSpace",
    "cosine_distance",
    "feature_sequences",
    "negative_table",
    "nearest_neighbors",
    "sgns_gradient",
    "sgns_objective",
    "train_skipgram",
    "train_step",
]
