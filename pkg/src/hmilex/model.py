"""HMIL model: one parameter block per schema node, packed into a flat
float64 vector.

Atomic nodes carry an encoder plus a dense embedding layer; dictionary
nodes carry a per-key transform, a per-key learned imputation vector and a
combine layer over the fixed-order key concatenation; list nodes carry a
layer over [elementwise-max || elementwise-mean] plus an imputation vector
for empty or fully masked lists.  The head is dense(k, relu) followed by a
linear layer with two outputs.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np

from . import schema as sch
from .encode import EncoderSpec, choose_encoder
from .errors import SchemaMismatch
from .schema import ATOMIC, DICTIONARY, SchemaNode

DEFAULT_K = 5


@dataclass
class AtomicBlock:
    path: str
    encoder: EncoderSpec
    w: int
    b: int


@dataclass
class KeySlot:
    key: str
    phi_w: int
    phi_b: int
    imp: int


@dataclass
class DictBlock:
    path: str
    slots: list[KeySlot]
    cat_w: int
    cat_b: int


@dataclass
class ListBlock:
    path: str
    w: int
    b: int
    imp: int


class ModelLayout:
    """Offsets of every parameter tensor inside the flat coefficient vector."""

    def __init__(self, schema: SchemaNode, k: int):
        self.k = k
        self.blocks: dict[str, AtomicBlock | DictBlock | ListBlock] = {}
        # (name, offset, shape, init) with init in {"glorot", "zero"}
        self.tensors: list[tuple[str, int, tuple[int, ...], str]] = []
        self._cursor = 0
        for path, node in sch.schema_nodes(schema):
            label = path or "/"
            if node.variant == ATOMIC:
                enc = choose_encoder(node)
                w = self._add(f"atomic:{label}:w", (k, enc.dim), "glorot")
                b = self._add(f"atomic:{label}:b", (k,), "zero")
                self.blocks[path] = AtomicBlock(path, enc, w, b)
            elif node.variant == DICTIONARY:
                slots = []
                for key in sorted(node.children):
                    slots.append(
                        KeySlot(
                            key,
                            self._add(f"dict:{label}:key:{key}:phi_w", (k, k), "glorot"),
                            self._add(f"dict:{label}:key:{key}:phi_b", (k,), "zero"),
                            self._add(f"dict:{label}:key:{key}:imputation", (k,), "zero"),
                        )
                    )
                cat_w = self._add(f"dict:{label}:combine_w", (k, len(slots) * k), "glorot")
                cat_b = self._add(f"dict:{label}:combine_b", (k,), "zero")
                self.blocks[path] = DictBlock(path, slots, cat_w, cat_b)
            else:
                w = self._add(f"list:{label}:agg_w", (k, 2 * k), "glorot")
                b = self._add(f"list:{label}:agg_b", (k,), "zero")
                imp = self._add(f"list:{label}:imputation", (k,), "zero")
                self.blocks[path] = ListBlock(path, w, b, imp)
        self.head_w1 = self._add("head:hidden_w", (k, k), "glorot")
        self.head_b1 = self._add("head:hidden_b", (k,), "zero")
        self.head_w2 = self._add("head:out_w", (2, k), "glorot")
        self.head_b2 = self._add("head:out_b", (2,), "zero")
        self.size = self._cursor

    def _add(self, name: str, shape: tuple[int, ...], init: str) -> int:
        offset = self._cursor
        self.tensors.append((name, offset, shape, init))
        self._cursor += int(np.prod(shape))
        return offset

    def encoders(self) -> dict[str, EncoderSpec]:
        return {
            path: blk.encoder
            for path, blk in self.blocks.items()
            if isinstance(blk, AtomicBlock)
        }


class EvalCounters:
    """Monotone counters of model evaluations, safe to bump concurrently."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.inference_count = 0
        self.gradient_count = 0

    def add_inferences(self, n: int = 1) -> None:
        with self._lock:
            self.inference_count += n

    def add_gradients(self, n: int = 1) -> None:
        with self._lock:
            self.gradient_count += n

    def snapshot(self) -> tuple[int, int]:
        with self._lock:
            return self.inference_count, self.gradient_count


@dataclass
class HmilModel:
    schema: SchemaNode
    layout: ModelLayout
    theta: np.ndarray
    counters: EvalCounters = field(default_factory=EvalCounters)

    @property
    def k(self) -> int:
        return self.layout.k

    def clone(self) -> "HmilModel":
        return HmilModel(self.schema, self.layout, self.theta.copy())


def _glorot_limit(shape: tuple[int, ...]) -> float:
    fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def build_model(schema: SchemaNode, k: int = DEFAULT_K, rng_seed=0) -> HmilModel:
    """Allocate one parameter block per schema node.

    Weight matrices are glorot-uniform, biases and imputation vectors zero.
    """
    layout = ModelLayout(schema, k)
    theta = np.zeros(layout.size, dtype=np.float64)
    rng = np.random.default_rng(rng_seed)
    for _, offset, shape, init in layout.tensors:
        size = int(np.prod(shape))
        if init == "glorot" and len(shape) > 1:
            limit = _glorot_limit(shape)
            theta[offset : offset + size] = rng.uniform(-limit, limit, size)
    return HmilModel(schema, layout, theta)


MODEL_FORMAT = "hmilex-model"
MODEL_VERSION = 1


def save_model(model: HmilModel, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "schema_fingerprint": sch.fingerprint(model.schema),
        "k": model.k,
        "encoders": {
            (p or "/"): enc.to_dict() for p, enc in model.layout.encoders().items()
        },
        "params": {
            name: {
                "shape": list(shape),
                "data": model.theta[offset : offset + int(np.prod(shape))].tolist(),
            }
            for name, offset, shape, _ in model.layout.tensors
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path, schema: SchemaNode) -> HmilModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise SchemaMismatch(f"not a model file: {path}")
    expected = sch.fingerprint(schema)
    if doc["schema_fingerprint"] != expected:
        raise SchemaMismatch(
            "model was built for a different schema "
            f"(fingerprint {doc['schema_fingerprint'][:12]}… != {expected[:12]}…)"
        )
    layout = ModelLayout(schema, int(doc["k"]))
    for path_label, enc_doc in doc["encoders"].items():
        key = "" if path_label == "/" else path_label
        blk = layout.blocks.get(key)
        if not isinstance(blk, AtomicBlock) or blk.encoder != EncoderSpec.from_dict(enc_doc):
            raise SchemaMismatch(f"encoder mismatch at {path_label}")
    theta = np.zeros(layout.size, dtype=np.float64)
    params = doc["params"]
    for name, offset, shape, _ in layout.tensors:
        entry = params.get(name)
        if entry is None or tuple(entry["shape"]) != shape:
            raise SchemaMismatch(f"missing or misshapen tensor {name}")
        theta[offset : offset + int(np.prod(shape))] = np.asarray(
            entry["data"], dtype=np.float64
        )
    return HmilModel(schema, layout, theta)
