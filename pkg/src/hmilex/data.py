"""Tree-structured samples: nodes, preorder indexing, masks, pruning."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from .errors import ParseError

DICT = 0
LIST = 1
LEAF = 2

_KIND_NAMES = {DICT: "dict", LIST: "list", LEAF: "leaf"}


@dataclass(eq=False)
class DataNode:
    """One node of a tree sample.

    Dictionary nodes keep ``keys`` (sorted) aligned with ``children``;
    list nodes use ``children`` only; leaves carry ``value``.  ``node_id``
    is the stable preorder index within the sample (root is 0).
    """

    kind: int
    keys: tuple[str, ...] = ()
    children: tuple["DataNode", ...] = ()
    value: Any = None
    node_id: int = field(default=-1, compare=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DataNode):
            return NotImplemented
        return structurally_equal(self, other)

    def __repr__(self) -> str:
        return f"DataNode({_KIND_NAMES[self.kind]}, id={self.node_id})"

    def child(self, key: str) -> "DataNode | None":
        """Dictionary child under *key*, or None."""
        for k, c in zip(self.keys, self.children):
            if k == key:
                return c
        return None


def value_category(value: Any) -> str:
    """Classify an atomic value: 'bool' | 'number' | 'string'."""
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    raise ParseError(f"unsupported atomic value of type {type(value).__name__}")


def values_equal(a: Any, b: Any) -> bool:
    """Exact equality with bool/number kept distinct (True != 1)."""
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def from_json(doc: Any) -> DataNode:
    """Build an id-indexed DataNode tree from a parsed JSON value.

    Dictionary keys are ordered lexicographically so preorder ids are
    canonical regardless of the key order in the source document.
    """
    root = _build(doc)
    reindex(root)
    return root


def _build(doc: Any) -> DataNode:
    if isinstance(doc, dict):
        keys = tuple(sorted(doc.keys()))
        for k in keys:
            if not isinstance(k, str):
                raise ParseError(f"non-string dictionary key: {k!r}")
        children = tuple(_build(doc[k]) for k in keys)
        return DataNode(DICT, keys=keys, children=children)
    if isinstance(doc, list):
        return DataNode(LIST, children=tuple(_build(v) for v in doc))
    if doc is None:
        raise ParseError("null values are not supported")
    value_category(doc)
    return DataNode(LEAF, value=doc)


def to_json(node: DataNode) -> Any:
    if node.kind == DICT:
        return {k: to_json(c) for k, c in zip(node.keys, node.children)}
    if node.kind == LIST:
        return [to_json(c) for c in node.children]
    return node.value


def reindex(root: DataNode) -> int:
    """Assign preorder node ids; returns the node count."""
    counter = 0
    stack = [root]
    while stack:
        node = stack.pop()
        node.node_id = counter
        counter += 1
        stack.extend(reversed(node.children))
    return counter


def iter_preorder(root: DataNode) -> Iterator[DataNode]:
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def structurally_equal(a: DataNode, b: DataNode) -> bool:
    """Equality of shape, keys and values, ignoring node ids."""
    if a.kind != b.kind or a.keys != b.keys or len(a.children) != len(b.children):
        return False
    if a.kind == LEAF:
        return values_equal(a.value, b.value)
    return all(structurally_equal(x, y) for x, y in zip(a.children, b.children))


def leaf_count(node: DataNode) -> int:
    return sum(1 for n in iter_preorder(node) if n.kind == LEAF)


def copy_tree(node: DataNode) -> DataNode:
    return DataNode(
        node.kind,
        keys=node.keys,
        children=tuple(copy_tree(c) for c in node.children),
        value=node.value,
        node_id=node.node_id,
    )


class TreeIndex:
    """Flat-array view of an id-indexed sample tree."""

    def __init__(self, root: DataNode):
        if root.node_id != 0:
            reindex(root)
        self.root = root
        nodes: list[DataNode] = list(iter_preorder(root))
        nodes.sort(key=lambda n: n.node_id)
        self.nodes = nodes
        n = len(nodes)
        self.n = n
        parent = np.full(n, -1, dtype=np.int64)
        depth = np.zeros(n, dtype=np.int64)
        for node in nodes:
            for c in node.children:
                parent[c.node_id] = node.node_id
                depth[c.node_id] = depth[node.node_id] + 1
        subtree = np.ones(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            subtree[parent[i]] += subtree[i]
        self.parent = parent
        self.depth = depth
        self.subtree = subtree
        self.kind = np.array([nd.kind for nd in nodes], dtype=np.int64)

    @property
    def leaf_ids(self) -> list[int]:
        return [i for i in range(self.n) if self.kind[i] == LEAF]

    @property
    def maskable_ids(self) -> list[int]:
        """Every dictionary value node and list item, i.e. all non-root ids."""
        return list(range(1, self.n))

    def mask_from_ids(self, ids) -> np.ndarray:
        mask = np.zeros(self.n, dtype=np.uint8)
        mask[0] = 1
        for i in ids:
            mask[i] = 1
        return mask

    def descendants_range(self, i: int) -> tuple[int, int]:
        """Preorder ids of node i's subtree form the half-open range [i, stop)."""
        return i, i + int(self.subtree[i])

    def is_prefix_closed(self, ids) -> bool:
        included = set(ids) | {0}
        return all(int(self.parent[i]) in included for i in included if i != 0)


@dataclass(frozen=True)
class NodeSet:
    """A subset of a sample's node ids; the unit of masking and explanation."""

    sample: DataNode
    included: frozenset[int]

    @classmethod
    def of(cls, sample: DataNode, ids) -> "NodeSet":
        return cls(sample, frozenset(int(i) for i in ids))


def prune(root: DataNode, included, *, reindex_result: bool = True) -> DataNode:
    """Materialize the subtree induced by a prefix-closed id set.

    The root is always kept.  Nodes whose id is absent are dropped with
    their whole subtree (ids below an excluded node are ignored even if
    present in *included*).
    """
    keep = set(int(i) for i in included) | {0}

    def rec(node: DataNode) -> DataNode:
        if node.kind == DICT:
            pairs = [
                (k, rec(c))
                for k, c in zip(node.keys, node.children)
                if c.node_id in keep
            ]
            return DataNode(
                DICT,
                keys=tuple(k for k, _ in pairs),
                children=tuple(c for _, c in pairs),
            )
        if node.kind == LIST:
            return DataNode(
                LIST,
                children=tuple(rec(c) for c in node.children if c.node_id in keep),
            )
        return DataNode(LEAF, value=node.value)

    result = rec(root)
    if reindex_result:
        reindex(result)
    return result
