"""Masked evaluation of samples under a model.

A sample is compiled once into a flat Tape (structure + sparse leaf
encodings + parameter offsets); every confidence or gradient query is then
a single kernel call.  Masks are uint8 arrays over preorder node ids; an
excluded dictionary child contributes its imputation vector, a list with
no included items contributes the list imputation vector.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .backends import Tape, alloc_buffers, confidence_of, kernels
from .data import DICT, LEAF, LIST, DataNode, NodeSet, TreeIndex
from .encode import encode_sparse
from .errors import SchemaMismatch
from .model import AtomicBlock, DictBlock, HmilModel, ListBlock
from .schema import LIST_STEP, validate


class CompiledSample:
    """A sample bound to a model: tree index plus the kernel tape."""

    def __init__(self, model: HmilModel, root: DataNode):
        violations = validate(root, model.schema)
        if violations:
            summary = "; ".join(str(v) for v in violations[:5])
            raise SchemaMismatch(f"sample does not match schema: {summary}")
        self.model = model
        self.index = TreeIndex(root)
        self.root = self.index.root
        self.tape = _build_tape(model, self.index)

    @property
    def n(self) -> int:
        return self.index.n


def _build_tape(model: HmilModel, index: TreeIndex) -> Tape:
    k = model.k
    n = index.n
    nodes = index.nodes
    layout = model.layout

    kind = np.empty(n, dtype=np.int64)
    enc_ptr = np.zeros(n + 1, dtype=np.int64)
    enc_idx: list[np.ndarray] = []
    enc_val: list[np.ndarray] = []
    leaf_w = np.full(n, -1, dtype=np.int64)
    leaf_b = np.full(n, -1, dtype=np.int64)
    leaf_dim = np.zeros(n, dtype=np.int64)
    slot_ptr = np.zeros(n + 1, dtype=np.int64)
    slot_child: list[int] = []
    slot_phi_w: list[int] = []
    slot_phi_b: list[int] = []
    slot_imp: list[int] = []
    cat_w = np.full(n, -1, dtype=np.int64)
    cat_b = np.full(n, -1, dtype=np.int64)
    item_ptr = np.zeros(n + 1, dtype=np.int64)
    item_child: list[int] = []
    list_w = np.full(n, -1, dtype=np.int64)
    list_b = np.full(n, -1, dtype=np.int64)
    list_imp = np.full(n, -1, dtype=np.int64)

    # schema path of each node, walked top-down
    paths = [""] * n
    for node in nodes:
        base = paths[node.node_id]
        if node.kind == DICT:
            for key, child in zip(node.keys, node.children):
                paths[child.node_id] = f"{base}/{key}"
        elif node.kind == LIST:
            for child in node.children:
                paths[child.node_id] = f"{base}/{LIST_STEP}"

    nnz = 0
    nslots = 0
    nitems = 0
    for node in nodes:
        i = node.node_id
        block = layout.blocks[paths[i]]
        if node.kind == LEAF:
            kind[i] = LEAF
            assert isinstance(block, AtomicBlock)
            idx, val = encode_sparse(node.value, block.encoder)
            enc_idx.append(idx)
            enc_val.append(val)
            nnz += len(idx)
            leaf_w[i] = block.w
            leaf_b[i] = block.b
            leaf_dim[i] = block.encoder.dim
        elif node.kind == DICT:
            kind[i] = DICT
            assert isinstance(block, DictBlock)
            present = {key: c.node_id for key, c in zip(node.keys, node.children)}
            for slot in block.slots:
                slot_child.append(present.get(slot.key, -1))
                slot_phi_w.append(slot.phi_w)
                slot_phi_b.append(slot.phi_b)
                slot_imp.append(slot.imp)
            nslots += len(block.slots)
            cat_w[i] = block.cat_w
            cat_b[i] = block.cat_b
        else:
            kind[i] = LIST
            assert isinstance(block, ListBlock)
            for child in node.children:
                item_child.append(child.node_id)
            nitems += len(node.children)
            list_w[i] = block.w
            list_b[i] = block.b
            list_imp[i] = block.imp
        enc_ptr[i + 1] = nnz
        slot_ptr[i + 1] = nslots
        item_ptr[i + 1] = nitems

    return Tape(
        n=n,
        k=k,
        kind=kind,
        parent=index.parent,
        enc_ptr=enc_ptr,
        enc_idx=np.concatenate(enc_idx) if enc_idx else np.empty(0, dtype=np.int64),
        enc_val=np.concatenate(enc_val) if enc_val else np.empty(0, dtype=np.float64),
        leaf_w=leaf_w,
        leaf_b=leaf_b,
        leaf_dim=leaf_dim,
        slot_ptr=slot_ptr,
        slot_child=np.asarray(slot_child, dtype=np.int64),
        slot_phi_w=np.asarray(slot_phi_w, dtype=np.int64),
        slot_phi_b=np.asarray(slot_phi_b, dtype=np.int64),
        slot_imp=np.asarray(slot_imp, dtype=np.int64),
        cat_w=cat_w,
        cat_b=cat_b,
        item_ptr=item_ptr,
        item_child=np.asarray(item_child, dtype=np.int64),
        list_w=list_w,
        list_b=list_b,
        list_imp=list_imp,
        head_w1=layout.head_w1,
        head_b1=layout.head_b1,
        head_w2=layout.head_w2,
        head_b2=layout.head_b2,
    )


_NO_EDGE = np.empty(0, dtype=np.float64)


class ClassifyResult(NamedTuple):
    logit_pos: float
    logit_neg: float
    confidence: float


class Evaluator:
    """Per-(model, sample) evaluation context with reusable buffers.

    Not thread-safe; build one evaluator per explanation task.
    """

    def __init__(self, model: HmilModel, sample: DataNode | CompiledSample):
        self.cs = sample if isinstance(sample, CompiledSample) else CompiledSample(model, sample)
        self.model = model
        self.index = self.cs.index
        self.n = self.cs.n
        self._h, self._phi, self._y, self._logits = alloc_buffers(self.cs.tape)
        self._dh = np.zeros_like(self._h)
        self._full = self.full_mask()

    def full_mask(self) -> np.ndarray:
        return np.ones(self.n, dtype=np.uint8)

    def resolve_mask(self, mask) -> np.ndarray:
        if mask is None:
            return self._full
        if isinstance(mask, NodeSet):
            return self.index.mask_from_ids(mask.included)
        if isinstance(mask, np.ndarray):
            return mask
        return self.index.mask_from_ids(mask)

    def _forward(self, mask, edge_w=None, ov=(-1, 0, 0.0)) -> None:
        use_edge = edge_w is not None
        kernels.forward(
            self.model.theta,
            self.cs.tape,
            mask,
            edge_w if use_edge else _NO_EDGE,
            use_edge,
            ov[0],
            ov[1],
            ov[2],
            self._h,
            self._phi,
            self._y,
            self._logits,
        )

    def logits(self, mask=None) -> np.ndarray:
        self.model.counters.add_inferences(1)
        self._forward(self.resolve_mask(mask))
        return self._logits.copy()

    def confidence(self, mask=None, *, edge_w=None, ov=(-1, 0, 0.0)) -> float:
        self.model.counters.add_inferences(1)
        self._forward(self.resolve_mask(mask), edge_w=edge_w, ov=ov)
        return confidence_of(self._logits)

    def embedding(self, mask=None) -> np.ndarray:
        self.model.counters.add_inferences(1)
        self._forward(self.resolve_mask(mask))
        return self._h[0].copy()

    def confidence_many(self, masks: np.ndarray) -> np.ndarray:
        masks = np.ascontiguousarray(masks, dtype=np.uint8)
        out = np.empty(masks.shape[0], dtype=np.float64)
        kernels.forward_many(
            self.model.theta, self.cs.tape, masks, self._h, self._phi, self._y, out
        )
        self.model.counters.add_inferences(masks.shape[0])
        return out

    def _dconf_dlogits(self) -> np.ndarray:
        p = np.exp(self._logits - self._logits.max())
        p /= p.sum()
        g = 2.0 * p[0] * p[1]
        return np.array([g, -g], dtype=np.float64)

    def confidence_grads(
        self,
        mask=None,
        *,
        edge_w=None,
        want_param: bool = False,
        want_edge: bool = False,
        dtheta: np.ndarray | None = None,
        dedge: np.ndarray | None = None,
    ) -> tuple[float, np.ndarray]:
        """One backward pass for d(confidence); returns (confidence, dh).

        dh[i] is the gradient of the confidence w.r.t. node i's embedding.
        """
        mask = self.resolve_mask(mask)
        use_edge = edge_w is not None
        self._forward(mask, edge_w=edge_w)
        conf = confidence_of(self._logits)
        if dtheta is None and want_param:
            dtheta = np.zeros_like(self.model.theta)
        if dedge is None and want_edge:
            dedge = np.zeros(self.n, dtype=np.float64)
        kernels.backward(
            self.model.theta,
            self.cs.tape,
            mask,
            edge_w if use_edge else _NO_EDGE,
            use_edge,
            self._h,
            self._phi,
            self._y,
            self._dconf_dlogits(),
            want_param,
            want_edge,
            self._dh,
            dtheta if dtheta is not None else np.empty(0, dtype=np.float64),
            dedge if dedge is not None else np.empty(0, dtype=np.float64),
        )
        self.model.counters.add_gradients(1)
        return conf, self._dh

    def ce_loss_grads(self, label: int, dtheta: np.ndarray) -> float:
        """Cross-entropy loss and parameter gradients, accumulated into dtheta.

        label is 0 for the positive class, 1 for the negative class.
        """
        self._forward(self._full)
        z = self._logits - self._logits.max()
        p = np.exp(z)
        p /= p.sum()
        loss = -float(np.log(max(p[label], 1e-300)))
        dlogits = p.copy()
        dlogits[label] -= 1.0
        kernels.backward(
            self.model.theta,
            self.cs.tape,
            self._full,
            _NO_EDGE,
            False,
            self._h,
            self._phi,
            self._y,
            dlogits,
            True,
            False,
            self._dh,
            dtheta,
            np.empty(0, dtype=np.float64),
        )
        self.model.counters.add_gradients(1)
        return loss

    def fd_confidence(self, node_id: int, coord: int, delta: float, mask=None) -> float:
        """Confidence with node_id's embedding perturbed by delta at coord."""
        return self.confidence(mask, ov=(node_id, coord, delta))


# -- public single-shot operations ------------------------------------------


def embed(model: HmilModel, sample: DataNode | CompiledSample, mask: NodeSet | None = None) -> np.ndarray:
    """Root embedding of the sample restricted to the masked nodes."""
    return Evaluator(model, sample).embedding(mask)


def classify(model: HmilModel, sample: DataNode | CompiledSample, mask: NodeSet | None = None) -> ClassifyResult:
    """Logits and softmax-difference confidence; positive iff confidence >= 0."""
    ev = Evaluator(model, sample)
    logits = ev.logits(mask)
    return ClassifyResult(float(logits[0]), float(logits[1]), confidence_of(logits))


def grad_wrt_subtree(model: HmilModel, sample: DataNode | CompiledSample, target_node_id: int) -> np.ndarray:
    """Gradient of the full-mask confidence w.r.t. one subtree embedding."""
    ev = Evaluator(model, sample)
    _, dh = ev.confidence_grads(None)
    return dh[target_node_id].copy()
