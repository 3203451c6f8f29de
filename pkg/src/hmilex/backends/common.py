"""Flat array layout shared by the numba and numpy kernel backends.

A Tape is the per-sample compilation result: tree structure, sparse leaf
encodings and parameter offsets into the model's flat coefficient vector.
Masked forward/backward passes interpret it bottom-up (preorder ids, so
descending id order visits children before parents).
"""

from typing import NamedTuple

import numpy as np

KIND_DICT = 0
KIND_LIST = 1
KIND_LEAF = 2


class Tape(NamedTuple):
    n: int
    k: int
    kind: np.ndarray        # int64[n]
    parent: np.ndarray      # int64[n], -1 at root
    # leaf encodings (CSR over nodes) and atomic layer offsets
    enc_ptr: np.ndarray     # int64[n+1]
    enc_idx: np.ndarray
    enc_val: np.ndarray
    leaf_w: np.ndarray      # int64[n], -1 for non-leaves
    leaf_b: np.ndarray
    leaf_dim: np.ndarray
    # dictionary key slots (CSR over nodes; one slot per schema key)
    slot_ptr: np.ndarray    # int64[n+1]
    slot_child: np.ndarray  # int64[S], node id or -1 when the key is absent
    slot_phi_w: np.ndarray
    slot_phi_b: np.ndarray
    slot_imp: np.ndarray
    cat_w: np.ndarray       # int64[n]
    cat_b: np.ndarray
    # list items (CSR over nodes)
    item_ptr: np.ndarray    # int64[n+1]
    item_child: np.ndarray
    list_w: np.ndarray      # int64[n]
    list_b: np.ndarray
    list_imp: np.ndarray
    # classification head offsets
    head_w1: int
    head_b1: int
    head_w2: int
    head_b2: int


def alloc_buffers(tape: Tape):
    """Work buffers reused across forward/backward calls on one tape."""
    h = np.zeros((tape.n, tape.k), dtype=np.float64)
    phi = np.zeros((len(tape.slot_child), tape.k), dtype=np.float64)
    y = np.zeros(tape.k, dtype=np.float64)
    logits = np.zeros(2, dtype=np.float64)
    return h, phi, y, logits


def confidence_of(logits: np.ndarray) -> float:
    """softmax(logits)[0] - softmax(logits)[1], computed stably."""
    m = logits[0] if logits[0] > logits[1] else logits[1]
    ea = np.exp(logits[0] - m)
    eb = np.exp(logits[1] - m)
    return float((ea - eb) / (ea + eb))
