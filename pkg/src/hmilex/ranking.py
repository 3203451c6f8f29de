"""Importance scores for every maskable node of a sample.

Four heuristics: absolute summed gradient, sampled Banzhaf values, an
optimized per-edge soft mask (GNN-explainer style, run on the tree model),
and a uniform-random baseline.  All rankers score exactly the maskable
nodes: every node except the root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataNode
from .engine import CompiledSample, Evaluator
from .model import HmilModel
from .train import Adam

GRAD = "grad"
BANZHAF = "banzhaf"
GNN_MASK = "gnn_mask"
RANDOM = "random"

# mask-optimization defaults: as-published-style and grid-tuned variants
GNN_ALPHA = 1.0
GNN_BETA = 0.005
GNN2_BETA = 0.1
GNN_LR = 0.01
GNN_STEPS = 200

BANZHAF_SAMPLES = 200


@dataclass
class RankingScores:
    method: str
    scores: dict[int, float]
    degenerate: tuple[int, ...] = ()

    def ordered_ids(self) -> list[int]:
        """Node ids in descending score order, ties broken by lowest id."""
        return sorted(self.scores, key=lambda i: (-self.scores[i], i))

    def to_path_map(self, index) -> dict[str, float]:
        paths = _node_paths(index)
        return {paths[i]: s for i, s in sorted(self.scores.items())}


def _node_paths(index) -> dict[int, str]:
    from .data import DICT, LIST

    paths = {0: ""}
    for node in index.nodes:
        base = paths[node.node_id]
        if node.kind == DICT:
            for key, child in zip(node.keys, node.children):
                paths[child.node_id] = f"{base}/{key}"
        elif node.kind == LIST:
            for pos, child in enumerate(node.children):
                paths[child.node_id] = f"{base}/{pos}"
    return paths


def rank_gradient(model: HmilModel, sample: DataNode | CompiledSample) -> RankingScores:
    """|sum of gradient coordinates| per node, from one backward pass."""
    ev = Evaluator(model, sample)
    _, dh = ev.confidence_grads(None)
    sums = np.abs(dh.sum(axis=1))
    return RankingScores(GRAD, {i: float(sums[i]) for i in range(1, ev.n)})


def banzhaf_from_values(
    subsets: np.ndarray, values: np.ndarray, node_ids: list[int]
) -> RankingScores:
    """Difference of include/exclude averages given evaluated subsets.

    subsets is a (draws, len(node_ids)) 0/1 matrix aligned with node_ids;
    values holds the classifier confidence of each draw.
    """
    inc = subsets.astype(np.float64)
    inc_counts = inc.sum(axis=0)
    exc_counts = inc.shape[0] - inc_counts
    inc_sum = inc.T @ values
    exc_sum = values.sum() - inc_sum
    scores: dict[int, float] = {}
    degenerate: list[int] = []
    for pos, node in enumerate(node_ids):
        ia = inc_sum[pos] / inc_counts[pos] if inc_counts[pos] > 0 else 0.0
        ea = exc_sum[pos] / exc_counts[pos] if exc_counts[pos] > 0 else 0.0
        if inc_counts[pos] == 0 or exc_counts[pos] == 0:
            degenerate.append(node)
        scores[node] = float(ia - ea)
    return RankingScores(BANZHAF, scores, tuple(degenerate))


def rank_banzhaf(
    model: HmilModel,
    sample: DataNode | CompiledSample,
    n_samples: int = BANZHAF_SAMPLES,
    seed=0,
) -> RankingScores:
    """Sampled Banzhaf values: fair-coin random subsets of maskable nodes."""
    ev = Evaluator(model, sample)
    node_ids = ev.index.maskable_ids
    rng = np.random.default_rng(seed)
    subsets = rng.integers(0, 2, size=(n_samples, len(node_ids)), dtype=np.uint8)
    masks = np.ones((n_samples, ev.n), dtype=np.uint8)
    masks[:, 1:] = subsets
    values = ev.confidence_many(masks)
    return banzhaf_from_values(subsets, values, node_ids)


def exact_banzhaf(model: HmilModel, sample: DataNode | CompiledSample) -> RankingScores:
    """Exhaustive enumeration over all subsets; oracle for small samples."""
    ev = Evaluator(model, sample)
    node_ids = ev.index.maskable_ids
    m = len(node_ids)
    if m > 20:
        raise ValueError(f"{m} maskable nodes is too many to enumerate")
    count = 1 << m
    subsets = ((np.arange(count)[:, None] >> np.arange(m)[None, :]) & 1).astype(np.uint8)
    masks = np.ones((count, ev.n), dtype=np.uint8)
    masks[:, 1:] = subsets
    values = ev.confidence_many(masks)
    scores = banzhaf_from_values(subsets, values, node_ids)
    return RankingScores(BANZHAF, scores.scores, scores.degenerate)


def rank_gnn_mask(
    model: HmilModel,
    sample: DataNode | CompiledSample,
    steps: int = GNN_STEPS,
    alpha: float = GNN_ALPHA,
    beta: float = GNN_BETA,
    lr: float = GNN_LR,
) -> RankingScores:
    """Optimize a sigmoid-squashed weight per parent->child edge.

    Gradient ascent (ADAM) on confidence - alpha*sum(entropy) -
    beta*sum(mask) for `steps` steps; the score of a node is the final
    weight of the edge to its parent.  Masked dictionary edges blend
    toward the imputation vector so weight 0 coincides with removal.
    """
    ev = Evaluator(model, sample)
    w = np.zeros(ev.n, dtype=np.float64)
    adam = Adam(ev.n, lr, 0.9, 0.999, 1e-8)
    dedge = np.zeros(ev.n, dtype=np.float64)
    for _ in range(steps):
        m = _sigmoid(w)
        dedge[:] = 0.0
        ev.confidence_grads(None, edge_w=m, want_edge=True, dedge=dedge)
        # d/dm of [conf - alpha*H(m) - beta*sum(m)]; dH/dm = -logit(m) = -w
        dm = dedge + alpha * w - beta
        dw = dm * m * (1.0 - m)
        dw[0] = 0.0
        adam.step(w, -dw)  # adam minimizes; negate for ascent
    m = _sigmoid(w)
    return RankingScores(GNN_MASK, {i: float(m[i]) for i in range(1, ev.n)})


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def rank_random(sample: DataNode | CompiledSample, seed=0) -> RankingScores:
    """I.i.d. uniform(0,1) scores; the baseline every heuristic must beat."""
    if isinstance(sample, CompiledSample):
        index = sample.index
    else:
        from .data import TreeIndex

        index = TreeIndex(sample)
    rng = np.random.default_rng(seed)
    return RankingScores(
        RANDOM, {i: float(rng.random()) for i in index.maskable_ids}
    )
