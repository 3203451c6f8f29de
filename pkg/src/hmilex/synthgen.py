"""Schema-driven synthetic samples with planted ground-truth concepts.

Sampling follows the schema statistics (key presence probabilities, list
length histograms, value histograms).  A concept is a set of subtree
fragments, each a merge of root-to-leaf paths; a sample is positive iff it
contains at least one fragment completely (injective matching of list
items).  Excess leaves of an explanation are its leaves left unmatched by
the best embedding of the inserted fragment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from .data import (
    DICT,
    LEAF,
    LIST,
    DataNode,
    from_json,
    leaf_count,
    to_json,
    values_equal,
)
from .errors import EmptyStats, GenerationStall, InsufficientPaths
from .schema import (
    ATOMIC,
    DICTIONARY,
    LIST_STEP,
    SchemaNode,
    SchemaPath,
    enumerate_paths,
    node_at,
)

POS, NEG = "pos", "neg"

# kind tag -> (number of fragments, paths merged per fragment)
CONCEPT_KINDS: dict[str, tuple[int, int]] = {
    "i": (1, 1),
    "ii": (2, 1),
    "iii": (5, 1),
    "iv": (1, 2),
    "v": (1, 5),
    "vi": (2, 2),
    "vii": (2, 5),
}

_REPAIR_ATTEMPTS = 200


@dataclass(frozen=True)
class Concept:
    kind: str
    fragments: tuple[DataNode, ...]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "fragments": [to_json(f) for f in self.fragments]}

    @classmethod
    def from_dict(cls, data: dict) -> "Concept":
        return cls(data["kind"], tuple(from_json(f) for f in data["fragments"]))


@dataclass
class LabeledSample:
    sample: DataNode
    label: str
    inserted: DataNode | None = None

    def to_dict(self) -> dict:
        return {
            "sample": to_json(self.sample),
            "label": self.label,
            "inserted": to_json(self.inserted) if self.inserted is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LabeledSample":
        return cls(
            from_json(data["sample"]),
            data["label"],
            from_json(data["inserted"]) if data.get("inserted") is not None else None,
        )


# -- sampling ------------------------------------------------------------


def _draw_value(atomic: SchemaNode, rng: np.random.Generator):
    hist = atomic.value_histogram
    if not hist:
        raise EmptyStats("atomic node has an empty value histogram")
    values = sorted(hist, key=_sort_key)
    if atomic.unique_count > len(hist):
        # capped histogram: fall back to uniform over the recorded values
        return values[rng.integers(len(values))]
    counts = np.array([hist[v] for v in values], dtype=np.float64)
    return values[rng.choice(len(values), p=counts / counts.sum())]


def _sort_key(v: Any):
    if isinstance(v, bool):
        return (0, v)
    if isinstance(v, (int, float)):
        return (1, v)
    return (2, v)


def _sample_obj(schema: SchemaNode, rng: np.random.Generator) -> Any:
    if schema.variant == DICTIONARY:
        if schema.node_count <= 0:
            raise EmptyStats("dictionary node was never observed")
        out = {}
        for key in sorted(schema.children):
            p = schema.key_presence.get(key, 0) / schema.node_count
            if rng.random() < p:
                out[key] = _sample_obj(schema.children[key], rng)
        return out
    if schema.variant == ATOMIC:
        return _draw_value(schema, rng)
    hist = schema.length_histogram
    if not hist:
        raise EmptyStats("list node has an empty length histogram")
    lengths = sorted(hist)
    counts = np.array([hist[l] for l in lengths], dtype=np.float64)
    length = lengths[rng.choice(len(lengths), p=counts / counts.sum())]
    if length > 0 and schema.item is None:
        raise EmptyStats("list node has items but no item schema")
    return [_sample_obj(schema.item, rng) for _ in range(length)]


def sample_from_schema(schema: SchemaNode, rng: np.random.Generator) -> DataNode:
    """Draw one sample preserving the schema's marginal statistics."""
    return from_json(_sample_obj(schema, rng))


# -- concepts ------------------------------------------------------------


def _instantiate_path(path: SchemaPath, rng: np.random.Generator) -> Any:
    obj: Any = _draw_value(path.terminal, rng)
    for step in reversed(path.steps):
        obj = [obj] if step == LIST_STEP else {step: obj}
    return obj


def _merge_paths(a: Any, b: Any) -> Any:
    """Merge two path instantiations; shared list prefixes share one item."""
    if isinstance(a, dict) and isinstance(b, dict):
        out = dict(a)
        for key, val in b.items():
            out[key] = _merge_paths(out[key], val) if key in out else val
        return out
    if isinstance(a, list) and isinstance(b, list):
        if not a:
            return list(b)
        if not b:
            return list(a)
        return [_merge_paths(a[0], b[0])]
    return b


def make_concept(schema: SchemaNode, kind: str, rng: np.random.Generator) -> Concept:
    """Draw distinct schema paths and merge them into concept fragments."""
    if kind not in CONCEPT_KINDS:
        raise ValueError(f"unknown concept kind {kind!r}")
    n_fragments, paths_per = CONCEPT_KINDS[kind]
    paths = enumerate_paths(schema)
    needed = n_fragments * paths_per
    if len(paths) < needed:
        raise InsufficientPaths(
            f"concept kind {kind} needs {needed} distinct paths, schema has {len(paths)}"
        )
    picks = rng.choice(len(paths), size=needed, replace=False)
    fragments = []
    for f in range(n_fragments):
        group = picks[f * paths_per : (f + 1) * paths_per]
        obj: Any = None
        for pi in sorted(group):
            inst = _instantiate_path(paths[pi], rng)
            obj = inst if obj is None else _merge_paths(obj, inst)
        fragments.append(from_json(obj))
    return Concept(kind, tuple(fragments))


# -- containment -----------------------------------------------------------


def _max_matched_leaves(frag: DataNode, node: DataNode) -> int:
    """Most fragment leaves embeddable at node (lists matched injectively)."""
    if frag.kind == LEAF:
        return 1 if node.kind == LEAF and values_equal(frag.value, node.value) else 0
    if frag.kind == DICT:
        if node.kind != DICT:
            return 0
        total = 0
        for key, fchild in zip(frag.keys, frag.children):
            nchild = node.child(key)
            if nchild is not None:
                total += _max_matched_leaves(fchild, nchild)
        return total
    if node.kind != LIST:
        return 0
    fitems = frag.children
    nitems = node.children
    if not fitems:
        return 0
    scores = [[_max_matched_leaves(f, u) for u in nitems] for f in fitems]
    # assignment by DP over sample items x subset of fragment items
    m = len(fitems)
    best = {0: 0}
    for j in range(len(nitems)):
        nxt = dict(best)
        for used, val in best.items():
            for fi in range(m):
                bit = 1 << fi
                if used & bit:
                    continue
                cand = val + scores[fi][j]
                key = used | bit
                if cand > nxt.get(key, -1):
                    nxt[key] = cand
        best = nxt
    return max(best.values())


def contains_subtree(sample: DataNode, fragment: DataNode) -> bool:
    """True iff the fragment embeds completely (homomorphism from the root)."""
    return _max_matched_leaves(fragment, sample) == leaf_count(fragment)


def excess_leaves(explanation, inserted: DataNode) -> int:
    """Explanation leaves not matched by the best embedding of the fragment."""
    tree = getattr(explanation, "pruned", explanation)
    return leaf_count(tree) - _max_matched_leaves(inserted, tree)


# -- dataset generation -----------------------------------------------------


def _merge_fragment_obj(base: Any, frag: Any) -> Any:
    """Plant a fragment: dictionary keys overwrite, list items are appended."""
    if isinstance(base, dict) and isinstance(frag, dict):
        out = dict(base)
        for key, val in frag.items():
            out[key] = _merge_fragment_obj(out[key], val) if key in out else val
        return out
    if isinstance(base, list) and isinstance(frag, list):
        return list(base) + list(frag)
    return frag


def merge_fragment(sample: DataNode, fragment: DataNode) -> DataNode:
    """Sample with the fragment planted; unchanged if already contained."""
    if contains_subtree(sample, fragment):
        return from_json(to_json(sample))
    return from_json(_merge_fragment_obj(to_json(sample), to_json(fragment)))


def _embeds(frag: Any, obj: Any) -> bool:
    """Full containment on plain JSON values, list items matched injectively."""
    if not isinstance(frag, (dict, list)):
        if isinstance(obj, (dict, list)):
            return False
        return isinstance(frag, bool) == isinstance(obj, bool) and frag == obj
    if isinstance(frag, dict):
        if not isinstance(obj, dict):
            return False
        return all(k in obj and _embeds(v, obj[k]) for k, v in frag.items())
    if not isinstance(obj, list):
        return False
    return _assignment(frag, obj) is not None


def _assignment(frag_items: list, obj_items: list) -> list[int] | None:
    """Injective mapping of fragment list items into sample items, if any."""

    def bt(fi: int, used: frozenset) -> list[int] | None:
        if fi == len(frag_items):
            return []
        for j in range(len(obj_items)):
            if j in used:
                continue
            if _embeds(frag_items[fi], obj_items[j]):
                rest = bt(fi + 1, used | {j})
                if rest is not None:
                    return [j] + rest
        return None

    return bt(0, frozenset())


def _first_leaf_path(frag: Any, obj: Any, path: tuple = ()) -> tuple | None:
    """Path of one matched sample leaf; assumes _embeds(frag, obj) holds."""
    if not isinstance(frag, (dict, list)):
        return path
    if isinstance(frag, dict):
        if not frag:
            return None
        key = sorted(frag)[0]
        return _first_leaf_path(frag[key], obj[key], path + (key,))
    if not frag:
        return None
    assign = _assignment(frag, obj)
    if assign is None:
        return None
    return _first_leaf_path(frag[0], obj[assign[0]], path + (assign[0],))


def _find_match_path(frag: Any, obj: Any) -> tuple | None:
    """Path (keys/indices) of one sample leaf matched by a full embedding."""
    if not _embeds(frag, obj):
        return None
    return _first_leaf_path(frag, obj)


def _mutate_leaf(obj: Any, path: tuple, schema: SchemaNode, rng: np.random.Generator) -> bool:
    """Replace the leaf at path with a different histogram value if any."""
    steps = tuple(LIST_STEP if isinstance(p, int) else p for p in path)
    atomic = node_at(schema, steps)
    current = obj
    for p in path[:-1]:
        current = current[p]
    old = current[path[-1]]
    choices = [v for v in sorted(atomic.value_histogram, key=_sort_key)
               if not values_equal(v, old)]
    if not choices:
        return False
    current[path[-1]] = choices[rng.integers(len(choices))]
    return True


def generate_dataset(
    schema: SchemaNode,
    concept: Concept,
    n: int,
    positive_fraction: float = 0.5,
    seed=0,
) -> list[LabeledSample]:
    """n labeled samples with exact class balance, every label re-verified."""
    if not 0.0 < positive_fraction < 1.0:
        raise ValueError("positive_fraction must be in (0, 1)")
    n_pos = round(n * positive_fraction)
    out: list[LabeledSample] = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        base = sample_from_schema(schema, rng)
        if i < n_pos:
            frag = concept.fragments[rng.integers(len(concept.fragments))]
            sample = merge_fragment(base, frag)
            if not contains_subtree(sample, frag):
                raise GenerationStall("planted fragment failed verification")
            out.append(LabeledSample(sample, POS, frag))
        else:
            obj = to_json(base)
            for attempt in range(_REPAIR_ATTEMPTS):
                hit = None
                for frag in concept.fragments:
                    hit = _find_match_path(to_json(frag), obj)
                    if hit is not None:
                        break
                if hit is None:
                    break
                if not _mutate_leaf(obj, hit, schema, rng):
                    obj = to_json(sample_from_schema(schema, rng))
            else:
                raise GenerationStall(
                    f"could not repair a negative sample after {_REPAIR_ATTEMPTS} tries"
                )
            sample = from_json(obj)
            if any(contains_subtree(sample, f) for f in concept.fragments):
                raise GenerationStall("negative sample still contains a fragment")
            out.append(LabeledSample(sample, NEG, None))
    return out


# -- files -----------------------------------------------------------------


def save_dataset(samples: list[LabeledSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_dict(), sort_keys=True))
            fh.write("\n")


def load_dataset(path) -> list[LabeledSample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(LabeledSample.from_dict(json.loads(line)))
    return out


def save_concept(concept: Concept, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(concept.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_concept(path) -> Concept:
    with open(path, "r", encoding="utf-8") as fh:
        return Concept.from_dict(json.load(fh))
