"""Minimal consistent explanations via subset selection over tree nodes.

An explanation is the smallest prefix-closed subtree the searches can find
whose masked confidence stays above the threshold tau.  Selection runs in
stages: addition (greedy or ranking-guided), optional random removal to
1-minimality, optional oscillating fine-tuning.  Three search modes differ
in what a candidate toggles: a single node (flat), a leaf with all its
ancestors (leafs), or a child with its whole subtree, one tree level at a
time (level-by-level).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import ranking as rk
from .backends import kernels
from .data import DataNode, NodeSet, leaf_count, prune, to_json
from .engine import CompiledSample, Evaluator
from .errors import InconsistentInput, UnreachableThreshold
from .model import HmilModel

SEARCH_MODES = ("flat", "leafs", "lbyl")
RANKINGS = ("greedy", "grad", "banz", "gnn", "gnn2", "rand")


@dataclass(frozen=True)
class MethodSpec:
    """Parsed `<search>-<ranking>-<stages>` method descriptor."""

    search: str
    ranking: str
    rr: bool = False
    ft: bool = False
    banz_samples: int = rk.BANZHAF_SAMPLES
    gnn_steps: int = rk.GNN_STEPS
    gnn_lr: float = rk.GNN_LR

    @classmethod
    def parse(cls, text: str, **overrides) -> "MethodSpec":
        parts = text.strip().lower().split("-")
        if len(parts) < 3:
            raise ValueError(f"bad method spec {text!r}: want <search>-<ranking>-<stages>")
        search, rank_name, stages = parts[0], parts[1], parts[2:]
        if search not in SEARCH_MODES:
            raise ValueError(f"unknown search mode {search!r}")
        if rank_name not in RANKINGS:
            raise ValueError(f"unknown ranking {rank_name!r}")
        expected = [s for s in ("add", "rr", "ft") if s in stages]
        if stages != expected or stages[0] != "add":
            raise ValueError(f"bad stages {stages!r}: want add[-rr][-ft]")
        spec = cls(search, rank_name, rr="rr" in stages, ft="ft" in stages)
        return replace(spec, **overrides) if overrides else spec

    @property
    def label(self) -> str:
        names = {"flat": "Flat", "leafs": "Leafs", "lbyl": "LbyL"}
        ranks = {
            "greedy": "Greedy", "grad": "Grad", "banz": "Banz",
            "gnn": "GNN", "gnn2": "GNN2", "rand": "Rand",
        }
        stages = "Add" + ("+RR" if self.rr else "") + ("+FT" if self.ft else "")
        return f"{names[self.search]}/{ranks[self.ranking]}/{stages}"

    def spec_string(self) -> str:
        stages = "add" + ("-rr" if self.rr else "") + ("-ft" if self.ft else "")
        return f"{self.search}-{self.ranking}-{stages}"


@dataclass
class Explanation:
    """A pruned sample consistent with the full sample's classification."""

    pruned: DataNode
    node_ids: frozenset[int]
    confidence: float
    tau: float
    leaf_count: int
    method: str
    seconds: float
    inferences: int
    gradients: int

    def node_set(self, sample: DataNode) -> NodeSet:
        return NodeSet(sample, self.node_ids)

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "tau": self.tau,
            "confidence": self.confidence,
            "leaf_count": self.leaf_count,
            "seconds": self.seconds,
            "inferences": self.inferences,
            "gradients": self.gradients,
        }

    def to_json(self):
        return to_json(self.pruned)


# -- closures ----------------------------------------------------------------


def closure(index, ids) -> set[int]:
    """Reachability closure: keep nodes whose every ancestor is included."""
    mask = index.mask_from_ids(ids)
    kernels.reachability_closure(index.parent, mask)
    return set(np.flatnonzero(mask).tolist())


def ancestor_closure(index, ids) -> set[int]:
    """Add all ancestors of the included nodes."""
    mask = index.mask_from_ids(ids)
    kernels.ancestor_closure(index.parent, mask)
    return set(np.flatnonzero(mask).tolist())


# -- evaluation functions ----------------------------------------------------


class EvalFn:
    """v(S): confidence of the sample masked to a closure of S."""

    def __init__(self, evaluator: Evaluator, mode: str):
        self.ev = evaluator
        self.mode = mode
        self.parent = evaluator.index.parent
        self.n = evaluator.n

    def mask_of(self, ids) -> np.ndarray:
        mask = np.zeros(self.n, dtype=np.uint8)
        mask[0] = 1
        for i in ids:
            mask[i] = 1
        if self.mode == "reach":
            kernels.reachability_closure(self.parent, mask)
        elif self.mode == "ancestors":
            kernels.ancestor_closure(self.parent, mask)
        return mask

    def __call__(self, ids) -> float:
        return self.ev.confidence(self.mask_of(ids))


class LevelEvalFn(EvalFn):
    """v(S) for one level: kept shallower nodes plus S with all descendants."""

    def __init__(self, evaluator: Evaluator, kept: set[int]):
        super().__init__(evaluator, "none")
        self.kept = sorted(kept)
        self.subtree = evaluator.index.subtree

    def mask_of(self, ids) -> np.ndarray:
        mask = np.zeros(self.n, dtype=np.uint8)
        mask[0] = 1
        for i in self.kept:
            mask[i] = 1
        for i in ids:
            mask[i : i + int(self.subtree[i])] = 1
        return mask


# -- subset selection --------------------------------------------------------


def greedy_add(candidates, v, tau: float) -> list[int]:
    """Add the candidate with the best gain each round until v >= tau."""
    remaining = sorted(candidates)
    chosen: list[int] = []
    if v(chosen) >= tau:
        return chosen
    while remaining:
        best_id = -1
        best_val = -np.inf
        for c in remaining:
            val = v(chosen + [c])
            if val > best_val:
                best_val = val
                best_id = c
        chosen.append(best_id)
        remaining.remove(best_id)
        if best_val >= tau:
            return chosen
    raise UnreachableThreshold(f"greedy addition exhausted candidates below tau={tau}")


def heuristic_add(ordered, v, tau: float) -> list[int]:
    """Add nodes in ranking order until v >= tau; one evaluation per node."""
    chosen: list[int] = []
    if not ordered:  # nothing maskable: the bare root must already satisfy tau
        return chosen
    for c in ordered:
        chosen.append(c)
        if v(chosen) >= tau:
            return chosen
    raise UnreachableThreshold(f"heuristic addition exhausted candidates below tau={tau}")


def random_removal(selected, v, tau: float, rng: np.random.Generator) -> set[int]:
    """Shuffled single-node removals until the set is 1-minimal above tau."""
    current = set(selected)
    while True:
        removed_any = False
        order = sorted(current)
        rng.shuffle(order)
        for x in order:
            if x not in current:
                continue
            trial = current - {x}
            if v(trial) >= tau:
                current = trial
                removed_any = True
        if not removed_any:
            return current


def fine_tune(selected, candidates, v, tau: float) -> set[int]:
    """Oscillating refinement: add l greedily, strip back down, grow l on stall.

    A move is accepted only if it shrinks the set or improves v at equal
    size, which keeps the procedure monotone and terminating.  The result
    is never larger than the input and stays consistent.
    """
    current = set(selected)
    current_val = v(current)
    pool = sorted(set(candidates))
    l = 1
    while l <= min(5, 2 * len(current)):
        trial = set(current)
        for _ in range(l):
            outside = [c for c in pool if c not in trial]
            if not outside:
                break
            best_id, best_val = -1, -np.inf
            for c in outside:
                val = v(trial | {c})
                if val > best_val:
                    best_val, best_id = val, c
            trial.add(best_id)
        while True:
            best_x, best_val = -1, -np.inf
            for x in sorted(trial):
                val = v(trial - {x})
                if val > best_val:
                    best_val, best_x = val, x
            if best_x >= 0 and best_val >= tau:
                trial.remove(best_x)
            else:
                break
        trial_val = v(trial)
        improved = len(trial) < len(current) or (
            len(trial) == len(current) and trial != current and trial_val > current_val
        )
        if improved and trial_val >= tau:
            current, current_val = trial, trial_val
        else:
            l += 1
    return current


# -- searches ------------------------------------------------------------


def _compute_scores(
    model: HmilModel, cs: CompiledSample, spec: MethodSpec, rank_seed
) -> rk.RankingScores | None:
    if spec.ranking == "greedy":
        return None
    if spec.ranking == "grad":
        return rk.rank_gradient(model, cs)
    if spec.ranking == "banz":
        return rk.rank_banzhaf(model, cs, n_samples=spec.banz_samples, seed=rank_seed)
    if spec.ranking == "gnn":
        return rk.rank_gnn_mask(
            model, cs, steps=spec.gnn_steps, alpha=rk.GNN_ALPHA, beta=rk.GNN_BETA,
            lr=spec.gnn_lr,
        )
    if spec.ranking == "gnn2":
        return rk.rank_gnn_mask(
            model, cs, steps=spec.gnn_steps, alpha=rk.GNN_ALPHA, beta=rk.GNN2_BETA,
            lr=spec.gnn_lr,
        )
    return rk.rank_random(cs, seed=rank_seed)


def _run_stages(candidates, v, tau, scores, spec, rng) -> set[int]:
    if spec.ranking == "greedy":
        selected = set(greedy_add(candidates, v, tau))
    else:
        order = sorted(candidates, key=lambda i: (-scores.scores[i], i))
        selected = set(heuristic_add(order, v, tau))
    if spec.rr:
        selected = random_removal(selected, v, tau, rng)
    if spec.ft:
        selected = fine_tune(selected, candidates, v, tau)
    return selected


def _check_consistent(full_conf: float, tau: float) -> None:
    if full_conf < tau:
        raise InconsistentInput(
            f"full-sample confidence {full_conf:.4f} is below tau={tau:.4f}"
        )


def search_flat(model, cs: CompiledSample, spec, tau, scores, rng) -> set[int]:
    v = EvalFn(Evaluator(model, cs), "reach")
    _check_consistent(v(range(1, cs.n)), tau)
    selected = _run_stages(list(range(1, cs.n)), v, tau, scores, spec, rng)
    return closure(cs.index, selected)


def search_leafs(model, cs: CompiledSample, spec, tau, scores, rng) -> set[int]:
    v = EvalFn(Evaluator(model, cs), "ancestors")
    leaves = cs.index.leaf_ids
    _check_consistent(v(leaves), tau)
    selected = _run_stages(leaves, v, tau, scores, spec, rng)
    return ancestor_closure(cs.index, selected)


def search_level_by_level(model, cs: CompiledSample, spec, tau, scores, rng) -> set[int]:
    index = cs.index
    ev = Evaluator(model, cs)
    _check_consistent(ev.confidence(None), tau)
    kept: set[int] = {0}
    nodes = index.nodes
    candidates = [c.node_id for c in nodes[0].children]
    while candidates:
        v = LevelEvalFn(ev, kept)
        selected = _run_stages(candidates, v, tau, scores, spec, rng)
        kept |= selected
        candidates = [
            c.node_id for i in sorted(selected) for c in nodes[i].children
        ]
    return kept


_SEARCHES = {
    "flat": search_flat,
    "leafs": search_leafs,
    "lbyl": search_level_by_level,
}


def explain_sample(
    model: HmilModel,
    sample: DataNode | CompiledSample,
    spec: MethodSpec | str,
    tau: float | None = None,
    tau_factor: float = 0.9,
    seed=0,
) -> Explanation:
    """Run one search x ranking x stages combination on one sample.

    tau defaults to tau_factor times the full-sample confidence.  Raises
    InconsistentInput when the full sample itself is below tau (in
    particular for samples not classified positive).
    """
    if isinstance(spec, str):
        spec = MethodSpec.parse(spec)
    if tau is None and not 0.0 < tau_factor <= 1.0:
        raise ValueError(f"tau_factor must be in (0, 1], got {tau_factor}")
    cs = sample if isinstance(sample, CompiledSample) else CompiledSample(model, sample)
    inf0, grad0 = model.counters.snapshot()
    start = time.perf_counter()

    ev = Evaluator(model, cs)
    full_conf = ev.confidence(None)
    if tau is None:
        tau = tau_factor * full_conf
    _check_consistent(full_conf, tau)

    ss = np.random.SeedSequence(seed)
    rank_seed, pipeline_seed = ss.spawn(2)
    scores = _compute_scores(model, cs, spec, rank_seed)
    rng = np.random.default_rng(pipeline_seed)
    ids = _SEARCHES[spec.search](model, cs, spec, tau, scores, rng)

    final_conf = ev.confidence(cs.index.mask_from_ids(ids))
    seconds = time.perf_counter() - start
    inf1, grad1 = model.counters.snapshot()
    pruned = prune(cs.root, ids)
    return Explanation(
        pruned=pruned,
        node_ids=frozenset(ids),
        confidence=final_conf,
        tau=tau,
        leaf_count=leaf_count(pruned),
        method=spec.label,
        seconds=seconds,
        inferences=inf1 - inf0,
        gradients=grad1 - grad0,
    )
