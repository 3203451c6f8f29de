"""Dataset schema: recursive structure and value statistics over a corpus.

The schema is the union of every document's shape.  Dictionary nodes track
which keys occur and how often, list nodes track length histograms, atomic
nodes track value histograms with a distinct-value cap.  The schema drives
model construction, synthetic generation and sample validation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable

from .data import DICT, LEAF, LIST, DataNode, value_category
from .errors import MixedTypeError, ParseError

DICTIONARY = "dict"
SEQUENCE = "list"
ATOMIC = "atomic"

HISTOGRAM_CAP = 10_000

LIST_STEP = "[]"


@dataclass
class SchemaNode:
    variant: str
    # dictionary
    children: dict[str, "SchemaNode"] = field(default_factory=dict)
    key_presence: dict[str, int] = field(default_factory=dict)
    node_count: int = 0
    # list
    item: "SchemaNode | None" = None
    length_histogram: dict[int, int] = field(default_factory=dict)
    # atomic
    value_kind: str | None = None
    value_histogram: dict[Any, int] = field(default_factory=dict)
    unique_count: int = 0
    observation_count: int = 0

    def __repr__(self) -> str:
        return f"SchemaNode({self.variant})"


@dataclass(frozen=True)
class SchemaPath:
    """Root-to-atomic walk: key strings with '[]' marking list descents."""

    steps: tuple[str, ...]
    terminal: SchemaNode

    def __str__(self) -> str:
        return "/" + "/".join(self.steps) if self.steps else "/"


@dataclass(frozen=True)
class Violation:
    code: str  # "unknown_key" | "kind_mismatch"
    path: str

    def __str__(self) -> str:
        return f"{self.code} at {self.path or '/'}"


def _variant_of(doc: Any) -> str:
    if isinstance(doc, dict):
        return DICTIONARY
    if isinstance(doc, list):
        return SEQUENCE
    return ATOMIC


def _observe(node: SchemaNode | None, doc: Any, path: str) -> SchemaNode:
    if doc is None:
        raise ParseError(f"null value at {path or '/'}")
    variant = _variant_of(doc)
    if node is None:
        node = SchemaNode(variant)
        if variant == ATOMIC:
            node.value_kind = value_category(doc)
    elif node.variant != variant:
        raise MixedTypeError(
            f"{node.variant} vs {variant} at {path or '/'}"
        )
    if variant == DICTIONARY:
        node.node_count += 1
        for key in sorted(doc.keys()):
            if not isinstance(key, str):
                raise ParseError(f"non-string key {key!r} at {path or '/'}")
            node.key_presence[key] = node.key_presence.get(key, 0) + 1
            node.children[key] = _observe(
                node.children.get(key), doc[key], f"{path}/{key}"
            )
    elif variant == SEQUENCE:
        node.node_count += 1
        length = len(doc)
        node.length_histogram[length] = node.length_histogram.get(length, 0) + 1
        for item in doc:
            node.item = _observe(node.item, item, f"{path}/{LIST_STEP}")
    else:
        kind = value_category(doc)
        if kind != node.value_kind:
            raise MixedTypeError(
                f"atomic kind {node.value_kind} vs {kind} at {path or '/'}"
            )
        node.observation_count += 1
        hist = node.value_histogram
        if doc in hist:
            hist[doc] += 1
        elif len(hist) < HISTOGRAM_CAP:
            hist[doc] = 1
            node.unique_count += 1
        else:
            # Above the cap only the distinct counter keeps growing; values
            # not admitted to the histogram cannot be deduplicated.
            node.unique_count += 1
    return node


def infer_schema(corpus: Iterable[Any]) -> SchemaNode:
    """Recursive union over all documents of a corpus.

    Raises ParseError for unsupported values and MixedTypeError when the
    same position holds conflicting variants across documents.
    """
    schema: SchemaNode | None = None
    count = 0
    for doc in corpus:
        schema = _observe(schema, doc, "")
        count += 1
    if schema is None or count == 0:
        raise ParseError("empty corpus")
    return schema


def merge_schema(a: SchemaNode, b: SchemaNode) -> SchemaNode:
    """Combine two schemas of compatible shape; counts and histograms add."""
    return _merge(a, b, "")


def _merge(a: SchemaNode, b: SchemaNode, path: str) -> SchemaNode:
    if a.variant != b.variant:
        raise MixedTypeError(f"{a.variant} vs {b.variant} at {path or '/'}")
    out = SchemaNode(a.variant)
    if a.variant == DICTIONARY:
        out.node_count = a.node_count + b.node_count
        for key in sorted(set(a.children) | set(b.children)):
            out.key_presence[key] = a.key_presence.get(key, 0) + b.key_presence.get(key, 0)
            ca, cb = a.children.get(key), b.children.get(key)
            if ca is None:
                out.children[key] = _copy(cb)
            elif cb is None:
                out.children[key] = _copy(ca)
            else:
                out.children[key] = _merge(ca, cb, f"{path}/{key}")
    elif a.variant == SEQUENCE:
        out.node_count = a.node_count + b.node_count
        hist = dict(a.length_histogram)
        for length, c in b.length_histogram.items():
            hist[length] = hist.get(length, 0) + c
        out.length_histogram = hist
        if a.item is None:
            out.item = _copy(b.item) if b.item is not None else None
        elif b.item is None:
            out.item = _copy(a.item)
        else:
            out.item = _merge(a.item, b.item, f"{path}/{LIST_STEP}")
    else:
        if a.value_kind != b.value_kind:
            raise MixedTypeError(
                f"atomic kind {a.value_kind} vs {b.value_kind} at {path or '/'}"
            )
        out.value_kind = a.value_kind
        out.observation_count = a.observation_count + b.observation_count
        hist = dict(a.value_histogram)
        for v, c in b.value_histogram.items():
            if v in hist:
                hist[v] += c
            elif len(hist) < HISTOGRAM_CAP:
                hist[v] = c
        out.value_histogram = hist
        shared = sum(1 for v in b.value_histogram if v in a.value_histogram)
        out.unique_count = a.unique_count + b.unique_count - shared
    return out


def _copy(node: SchemaNode | None) -> SchemaNode | None:
    if node is None:
        return None
    out = SchemaNode(node.variant)
    out.node_count = node.node_count
    out.key_presence = dict(node.key_presence)
    out.children = {k: _copy(c) for k, c in node.children.items()}
    out.length_histogram = dict(node.length_histogram)
    out.item = _copy(node.item)
    out.value_kind = node.value_kind
    out.value_histogram = dict(node.value_histogram)
    out.unique_count = node.unique_count
    out.observation_count = node.observation_count
    return out


def copy_schema(node: SchemaNode) -> SchemaNode:
    return _copy(node)


def validate(sample: DataNode, schema: SchemaNode) -> list[Violation]:
    """Structural check: missing keys are fine, extra keys and wrong kinds are not."""
    out: list[Violation] = []
    _validate(sample, schema, "", out)
    return out


_VARIANT_FOR_KIND = {DICT: DICTIONARY, LIST: SEQUENCE, LEAF: ATOMIC}


def _validate(node: DataNode, schema: SchemaNode, path: str, out: list[Violation]) -> None:
    if schema.variant != _VARIANT_FOR_KIND[node.kind]:
        out.append(Violation("kind_mismatch", path))
        return
    if node.kind == DICT:
        for key, child in zip(node.keys, node.children):
            sub = schema.children.get(key)
            if sub is None:
                out.append(Violation("unknown_key", f"{path}/{key}"))
            else:
                _validate(child, sub, f"{path}/{key}", out)
    elif node.kind == LIST:
        if schema.item is None:
            if node.children:
                out.append(Violation("unknown_key", f"{path}/{LIST_STEP}"))
            return
        for child in node.children:
            _validate(child, schema.item, f"{path}/{LIST_STEP}", out)
    else:
        if value_category(node.value) != schema.value_kind:
            out.append(Violation("kind_mismatch", path))


def enumerate_paths(schema: SchemaNode) -> list[SchemaPath]:
    """One path per reachable atomic node, keys in lexicographic order."""
    out: list[SchemaPath] = []

    def rec(node: SchemaNode, steps: tuple[str, ...]) -> None:
        if node.variant == ATOMIC:
            out.append(SchemaPath(steps, node))
        elif node.variant == DICTIONARY:
            for key in sorted(node.children):
                rec(node.children[key], steps + (key,))
        else:
            if node.item is not None:
                rec(node.item, steps + (LIST_STEP,))

    rec(schema, ())
    return out


def node_at(schema: SchemaNode, steps: Iterable[str]) -> SchemaNode:
    node = schema
    for step in steps:
        if step == LIST_STEP:
            if node.item is None:
                raise KeyError(step)
            node = node.item
        else:
            node = node.children[step]
    return node


def schema_nodes(schema: SchemaNode) -> list[tuple[str, SchemaNode]]:
    """All schema nodes with their path strings, preorder with sorted keys."""
    out: list[tuple[str, SchemaNode]] = []

    def rec(node: SchemaNode, path: str) -> None:
        out.append((path, node))
        if node.variant == DICTIONARY:
            for key in sorted(node.children):
                rec(node.children[key], f"{path}/{key}")
        elif node.variant == SEQUENCE and node.item is not None:
            rec(node.item, f"{path}/{LIST_STEP}")

    rec(schema, "")
    return out


# -- serialization -----------------------------------------------------------

_KIND_TAGS = {"string": "s", "number": "n", "bool": "b"}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


def _value_sort_key(v: Any):
    if isinstance(v, bool):
        return (0, v)
    if isinstance(v, (int, float)):
        return (1, v)
    return (2, v)


def to_dict(schema: SchemaNode) -> dict:
    if schema.variant == DICTIONARY:
        return {
            "variant": "dict",
            "node_count": schema.node_count,
            "key_presence": {k: schema.key_presence[k] for k in sorted(schema.key_presence)},
            "children": {k: to_dict(schema.children[k]) for k in sorted(schema.children)},
        }
    if schema.variant == SEQUENCE:
        return {
            "variant": "list",
            "node_count": schema.node_count,
            "length_histogram": {
                str(l): schema.length_histogram[l] for l in sorted(schema.length_histogram)
            },
            "item": to_dict(schema.item) if schema.item is not None else None,
        }
    return {
        "variant": "atomic",
        "value_kind": schema.value_kind,
        "observation_count": schema.observation_count,
        "unique_count": schema.unique_count,
        "value_histogram": [
            [v, schema.value_histogram[v]]
            for v in sorted(schema.value_histogram, key=_value_sort_key)
        ],
    }


def from_dict(data: dict) -> SchemaNode:
    variant = data["variant"]
    if variant == "dict":
        node = SchemaNode(DICTIONARY)
        node.node_count = data["node_count"]
        node.key_presence = dict(data["key_presence"])
        node.children = {k: from_dict(v) for k, v in data["children"].items()}
        return node
    if variant == "list":
        node = SchemaNode(SEQUENCE)
        node.node_count = data["node_count"]
        node.length_histogram = {int(l): c for l, c in data["length_histogram"].items()}
        node.item = from_dict(data["item"]) if data["item"] is not None else None
        return node
    node = SchemaNode(ATOMIC)
    node.value_kind = data["value_kind"]
    node.observation_count = data["observation_count"]
    node.unique_count = data["unique_count"]
    node.value_histogram = {}
    for v, c in data["value_histogram"]:
        node.value_histogram[v] = c
    return node


def dumps(schema: SchemaNode) -> str:
    return json.dumps(to_dict(schema), sort_keys=True, separators=(",", ":"))


def loads(text: str) -> SchemaNode:
    return from_dict(json.loads(text))


def fingerprint(schema: SchemaNode) -> str:
    return hashlib.sha256(dumps(schema).encode("utf-8")).hexdigest()


# -- pretty printer ----------------------------------------------------------

_KIND_LABEL = {"string": "String", "number": "Number", "bool": "Bool"}


def _atomic_summary(node: SchemaNode) -> str:
    capped = node.unique_count > len(node.value_histogram)
    unique = f"{HISTOGRAM_CAP}+" if capped else str(node.unique_count)
    label = _KIND_LABEL.get(node.value_kind or "", "?")
    return f"{label} ({unique} unique out of {node.observation_count})"


def pretty(schema: SchemaNode, indent: int = 0) -> str:
    """Human-readable rendering of the schema with per-node statistics."""
    pad = "  " * indent
    lines: list[str] = []
    if schema.variant == DICTIONARY:
        lines.append(f"{pad}[Dict] (present {schema.node_count} times)")
        for key in sorted(schema.children):
            child = schema.children[key]
            if child.variant == ATOMIC:
                lines.append(f"{pad}  {key}: {_atomic_summary(child)}")
            elif child.variant == SEQUENCE:
                lines.append(f"{pad}  {key}: [List] (present {child.node_count} times)")
                if child.item is not None:
                    lines.append(pretty(child.item, indent + 2))
            else:
                lines.append(f"{pad}  {key}:")
                lines.append(pretty(child, indent + 2))
    elif schema.variant == SEQUENCE:
        lines.append(f"{pad}[List] (present {schema.node_count} times)")
        if schema.item is not None:
            lines.append(pretty(schema.item, indent + 1))
    else:
        lines.append(f"{pad}{_atomic_summary(schema)}")
    return "\n".join(lines)


def read_jsonl(path) -> Iterable[Any]:
    """Yield parsed documents from a JSON-lines file."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
