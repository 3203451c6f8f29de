"""Training: ADAM on softmax cross-entropy, plus multi-seed model selection."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import DataNode, from_json
from .engine import Evaluator, classify
from .model import HmilModel, build_model
from .schema import SchemaNode

POS, NEG = "pos", "neg"
_LABEL_INDEX = {POS: 0, NEG: 1}


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 100
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"loss": self.loss}


class Adam:
    def __init__(self, size: int, lr: float, beta1: float, beta2: float, eps: float):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size, dtype=np.float64)
        self.v = np.zeros(size, dtype=np.float64)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1**self.t)
        vhat = self.v / (1.0 - self.beta2**self.t)
        theta -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def train(
    model: HmilModel,
    dataset: list[tuple[DataNode, str]],
    config: TrainConfig | None = None,
) -> TrainHistory:
    """Minimize cross-entropy in place; returns the per-step loss history."""
    config = config or TrainConfig()
    if not dataset:
        raise ValueError("dataset is empty")
    history = TrainHistory()
    if config.steps <= 0:
        return history
    evaluators = [
        (Evaluator(model, sample), _LABEL_INDEX[label]) for sample, label in dataset
    ]
    rng = np.random.default_rng(config.seed)
    adam = Adam(model.theta.size, config.learning_rate, config.beta1, config.beta2, config.eps)
    grad = np.zeros_like(model.theta)
    n = len(evaluators)
    batch = min(config.batch_size, n)
    for _ in range(config.steps):
        picks = rng.choice(n, size=batch, replace=False)
        grad[:] = 0.0
        total = 0.0
        for idx in picks:
            ev, label = evaluators[idx]
            total += ev.ce_loss_grads(label, grad)
        grad /= batch
        adam.step(model.theta, grad)
        history.loss.append(total / batch)
    return history


def training_accuracy(model: HmilModel, dataset: list[tuple[DataNode, str]]) -> float:
    hits = 0
    for sample, label in dataset:
        conf = classify(model, sample).confidence
        predicted = POS if conf >= 0.0 else NEG
        hits += predicted == label
    return hits / len(dataset)


@dataclass
class CandidateReport:
    seed: int
    empty_confidence: float
    concept_confidence: float
    final_loss: float
    passes_empty_check: bool


@dataclass
class SelectionResult:
    model: HmilModel
    chosen: int
    candidates: list[CandidateReport]
    histories: list[TrainHistory]

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen,
            "candidates": [
                {
                    "seed": c.seed,
                    "empty_confidence": c.empty_confidence,
                    "concept_confidence": c.concept_confidence,
                    "final_loss": c.final_loss,
                    "passes_empty_check": c.passes_empty_check,
                }
                for c in self.candidates
            ],
        }


def select_best_model(
    schema: SchemaNode,
    dataset: list[tuple[DataNode, str]],
    concepts: list[DataNode],
    n: int = 10,
    config: TrainConfig | None = None,
    k: int = 5,
    base_seed: int = 0,
) -> SelectionResult:
    """Train n candidates with distinct seeds and pick the best one.

    Candidates that classify the empty sample as positive are discarded;
    among the rest the one with the highest mean confidence over the
    concept fragments wins.  If every candidate fails the empty-sample
    check, the one with the most negative empty-sample confidence is
    returned with a warning.
    """
    config = config or TrainConfig()
    empty = from_json({})
    candidates: list[CandidateReport] = []
    models: list[HmilModel] = []
    histories: list[TrainHistory] = []
    for i in range(n):
        seed = int(np.random.SeedSequence([base_seed, i]).generate_state(1)[0])
        model = build_model(schema, k=k, rng_seed=seed)
        cfg = TrainConfig(
            steps=config.steps,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            beta1=config.beta1,
            beta2=config.beta2,
            eps=config.eps,
            seed=seed,
        )
        history = train(model, dataset, cfg)
        empty_conf = classify(model, empty).confidence
        concept_conf = (
            float(np.mean([classify(model, c).confidence for c in concepts]))
            if concepts
            else float("nan")
        )
        candidates.append(
            CandidateReport(
                seed=seed,
                empty_confidence=empty_conf,
                concept_confidence=concept_conf,
                final_loss=history.loss[-1] if history.loss else float("nan"),
                passes_empty_check=empty_conf < 0.0,
            )
        )
        models.append(model)
        histories.append(history)
    survivors = [i for i, c in enumerate(candidates) if c.passes_empty_check]
    if survivors:
        if concepts:
            chosen = max(survivors, key=lambda i: (candidates[i].concept_confidence, -i))
        else:
            chosen = min(survivors, key=lambda i: (candidates[i].empty_confidence, i))
    else:
        warnings.warn("no candidate classified the empty sample as negative")
        chosen = min(range(n), key=lambda i: (candidates[i].empty_confidence, i))
    return SelectionResult(models[chosen], chosen, candidates, histories)
