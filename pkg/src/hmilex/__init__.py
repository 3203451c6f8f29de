"""Train HMIL classifiers on raw JSON-like tree data and compute minimal,
classification-consistent explanations."""

from . import encode, schema, train
from .backends import BACKEND
from .data import DataNode, NodeSet, from_json, to_json
from .encode import EncoderSpec, choose_encoder
from .engine import ClassifyResult, CompiledSample, Evaluator, classify, embed, grad_wrt_subtree
from .explain import Explanation, MethodSpec, explain_sample
from .model import HmilModel, build_model, load_model, save_model
from .ranking import RankingScores, rank_banzhaf, rank_gnn_mask, rank_gradient, rank_random
from .schema import SchemaNode, SchemaPath, enumerate_paths, infer_schema, merge_schema, validate
from .synthgen import (
    Concept,
    LabeledSample,
    contains_subtree,
    excess_leaves,
    generate_dataset,
    make_concept,
    sample_from_schema,
)
from .train import TrainConfig, select_best_model

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ClassifyResult",
    "CompiledSample",
    "Concept",
    "DataNode",
    "EncoderSpec",
    "Evaluator",
    "Explanation",
    "HmilModel",
    "LabeledSample",
    "MethodSpec",
    "NodeSet",
    "RankingScores",
    "SchemaNode",
    "SchemaPath",
    "TrainConfig",
    "build_model",
    "choose_encoder",
    "classify",
    "contains_subtree",
    "embed",
    "encode",
    "enumerate_paths",
    "excess_leaves",
    "explain_sample",
    "from_json",
    "generate_dataset",
    "grad_wrt_subtree",
    "infer_schema",
    "load_model",
    "make_concept",
    "merge_schema",
    "rank_banzhaf",
    "rank_gnn_mask",
    "rank_gradient",
    "rank_random",
    "sample_from_schema",
    "save_model",
    "select_best_model",
    "to_json",
    "train",
    "validate",
]
