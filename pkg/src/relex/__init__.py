"""Relation extraction with joint dependency-edge prediction and
entity-conditioned gating, built on a self-contained numpy autodiff core."""

from . import autodiff
from .data import (
    Corpus,
    DependencyTree,
    EmbeddingTable,
    RelationInstance,
    Sentence,
    Token,
    adjacency_from_tree,
    dep_relation_multihot,
    load_corpus,
    load_embeddings,
    path_flags,
    write_corpus,
    write_embeddings,
)
from .encoder import FeatureConfig
from .evaluation import (
    representation_similarity,
    sample_complexity_sweep,
    score,
)
from .model import (
    ModelConfig,
    Vocab,
    forward_instance,
    init_params,
    predict_labels,
)
from .synthetic import SynthSpec, generate_synthetic, oracle_label
from .training import (
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "DependencyTree",
    "EmbeddingTable",
    "FeatureConfig",
    "ModelConfig",
    "RelationInstance",
    "Sentence",
    "SynthSpec",
    "Token",
    "TrainConfig",
    "Vocab",
    "adjacency_from_tree",
    "autodiff",
    "dep_relation_multihot",
    "forward_instance",
    "generate_synthetic",
    "init_params",
    "load_checkpoint",
    "load_corpus",
    "load_embeddings",
    "oracle_label",
    "path_flags",
    "predict_labels",
    "representation_similarity",
    "sample_complexity_sweep",
    "save_checkpoint",
    "score",
    "train",
    "write_corpus",
    "write_embeddings",
]
