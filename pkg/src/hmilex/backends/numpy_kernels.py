"""Pure-numpy evaluation kernels (fallback backend).

Same contracts as numba_kernels: vectorized per node, Python loop over
nodes.  Kept readable; the numba backend is the fast path.
"""

from __future__ import annotations

import numpy as np

from .common import KIND_DICT, KIND_LEAF, Tape, confidence_of

NAME = "numpy"


def _w(theta: np.ndarray, off: int, rows: int, cols: int) -> np.ndarray:
    return theta[off : off + rows * cols].reshape(rows, cols)


def reachability_closure(parent: np.ndarray, mask: np.ndarray) -> None:
    """Zero out nodes with any excluded ancestor; root is forced in."""
    mask[0] = 1
    for i in range(1, len(mask)):
        if mask[i] and not mask[parent[i]]:
            mask[i] = 0


def ancestor_closure(parent: np.ndarray, mask: np.ndarray) -> None:
    """Add every ancestor of included nodes; root is forced in."""
    for i in range(len(mask) - 1, 0, -1):
        if mask[i]:
            mask[parent[i]] = 1
    mask[0] = 1


def forward(
    theta: np.ndarray,
    tape: Tape,
    mask: np.ndarray,
    edge_w: np.ndarray,
    use_edge: bool,
    ov_node: int,
    ov_coord: int,
    ov_delta: float,
    h: np.ndarray,
    phi: np.ndarray,
    y: np.ndarray,
    logits: np.ndarray,
) -> None:
    k = tape.k
    for i in range(tape.n - 1, -1, -1):
        kind = tape.kind[i]
        if kind == KIND_LEAF:
            lo, hi = tape.enc_ptr[i], tape.enc_ptr[i + 1]
            w = _w(theta, tape.leaf_w[i], k, tape.leaf_dim[i])
            pre = theta[tape.leaf_b[i] : tape.leaf_b[i] + k].copy()
            if hi > lo:
                pre += w[:, tape.enc_idx[lo:hi]] @ tape.enc_val[lo:hi]
            h[i] = np.maximum(pre, 0.0)
        elif kind == KIND_DICT:
            s0, s1 = tape.slot_ptr[i], tape.slot_ptr[i + 1]
            nslots = s1 - s0
            z = np.empty(nslots * k, dtype=np.float64)
            for j in range(s0, s1):
                c = tape.slot_child[j]
                imp = theta[tape.slot_imp[j] : tape.slot_imp[j] + k]
                seg = slice((j - s0) * k, (j - s0 + 1) * k)
                if c >= 0 and mask[c]:
                    pw = _w(theta, tape.slot_phi_w[j], k, k)
                    pb = theta[tape.slot_phi_b[j] : tape.slot_phi_b[j] + k]
                    phi[j] = np.maximum(pw @ h[c] + pb, 0.0)
                    if use_edge:
                        m = edge_w[c]
                        z[seg] = m * phi[j] + (1.0 - m) * imp
                    else:
                        z[seg] = phi[j]
                else:
                    z[seg] = imp
            w = _w(theta, tape.cat_w[i], k, nslots * k)
            b = theta[tape.cat_b[i] : tape.cat_b[i] + k]
            h[i] = np.maximum(w @ z + b, 0.0)
        else:  # list
            lo, hi = tape.item_ptr[i], tape.item_ptr[i + 1]
            members = [int(c) for c in tape.item_child[lo:hi] if mask[c]]
            if not members:
                h[i] = theta[tape.list_imp[i] : tape.list_imp[i] + k]
            else:
                stack = h[members, :]
                if use_edge:
                    stack = stack * edge_w[members][:, None]
                agg = np.concatenate([stack.max(axis=0), stack.mean(axis=0)])
                w = _w(theta, tape.list_w[i], k, 2 * k)
                b = theta[tape.list_b[i] : tape.list_b[i] + k]
                h[i] = np.maximum(w @ agg + b, 0.0)
        if i == ov_node:
            h[i, ov_coord] += ov_delta
    w1 = _w(theta, tape.head_w1, k, k)
    b1 = theta[tape.head_b1 : tape.head_b1 + k]
    y[:] = np.maximum(w1 @ h[0] + b1, 0.0)
    w2 = _w(theta, tape.head_w2, 2, k)
    b2 = theta[tape.head_b2 : tape.head_b2 + 2]
    logits[:] = w2 @ y + b2


def backward(
    theta: np.ndarray,
    tape: Tape,
    mask: np.ndarray,
    edge_w: np.ndarray,
    use_edge: bool,
    h: np.ndarray,
    phi: np.ndarray,
    y: np.ndarray,
    dlogits: np.ndarray,
    want_param: bool,
    want_edge: bool,
    dh: np.ndarray,
    dtheta: np.ndarray,
    dedge: np.ndarray,
) -> None:
    """Reverse pass matching the last forward call (same mask/edge weights).

    Fills dh with the adjoint of every node embedding; accumulates
    parameter gradients into dtheta and edge-weight gradients into dedge
    when requested.  dh is overwritten, dtheta/dedge are accumulated into.
    """
    k = tape.k
    dh[:] = 0.0
    # head
    w2 = _w(theta, tape.head_w2, 2, k)
    dy = w2.T @ dlogits
    if want_param:
        dw2 = _w(dtheta, tape.head_w2, 2, k)
        dw2 += np.outer(dlogits, y)
        dtheta[tape.head_b2 : tape.head_b2 + 2] += dlogits
    dy *= y > 0
    w1 = _w(theta, tape.head_w1, k, k)
    dh[0] = w1.T @ dy
    if want_param:
        dw1 = _w(dtheta, tape.head_w1, k, k)
        dw1 += np.outer(dy, h[0])
        dtheta[tape.head_b1 : tape.head_b1 + k] += dy

    for i in range(tape.n):
        if not np.any(dh[i]):
            continue
        kind = tape.kind[i]
        if kind == KIND_LEAF:
            if want_param:
                dpre = dh[i] * (h[i] > 0)
                dtheta[tape.leaf_b[i] : tape.leaf_b[i] + k] += dpre
                lo, hi = tape.enc_ptr[i], tape.enc_ptr[i + 1]
                if hi > lo:
                    dw = _w(dtheta, tape.leaf_w[i], k, tape.leaf_dim[i])
                    dw[:, tape.enc_idx[lo:hi]] += np.outer(dpre, tape.enc_val[lo:hi])
        elif kind == KIND_DICT:
            s0, s1 = tape.slot_ptr[i], tape.slot_ptr[i + 1]
            nslots = s1 - s0
            dpre = dh[i] * (h[i] > 0)
            w = _w(theta, tape.cat_w[i], k, nslots * k)
            dz = w.T @ dpre
            if want_param:
                # rebuild the concatenated input for the combine-layer gradient
                z = np.empty(nslots * k, dtype=np.float64)
                for j in range(s0, s1):
                    c = tape.slot_child[j]
                    imp = theta[tape.slot_imp[j] : tape.slot_imp[j] + k]
                    seg = slice((j - s0) * k, (j - s0 + 1) * k)
                    if c >= 0 and mask[c]:
                        if use_edge:
                            m = edge_w[c]
                            z[seg] = m * phi[j] + (1.0 - m) * imp
                        else:
                            z[seg] = phi[j]
                    else:
                        z[seg] = imp
                dw = _w(dtheta, tape.cat_w[i], k, nslots * k)
                dw += np.outer(dpre, z)
                dtheta[tape.cat_b[i] : tape.cat_b[i] + k] += dpre
            for j in range(s0, s1):
                c = tape.slot_child[j]
                dseg = dz[(j - s0) * k : (j - s0 + 1) * k]
                if c >= 0 and mask[c]:
                    imp = theta[tape.slot_imp[j] : tape.slot_imp[j] + k]
                    if use_edge:
                        m = edge_w[c]
                        if want_edge:
                            dedge[c] += float(dseg @ (phi[j] - imp))
                        dphi = m * dseg
                        if want_param:
                            dtheta[tape.slot_imp[j] : tape.slot_imp[j] + k] += (1.0 - m) * dseg
                    else:
                        dphi = dseg
                    dphi = dphi * (phi[j] > 0)
                    pw = _w(theta, tape.slot_phi_w[j], k, k)
                    dh[c] += pw.T @ dphi
                    if want_param:
                        dpw = _w(dtheta, tape.slot_phi_w[j], k, k)
                        dpw += np.outer(dphi, h[c])
                        dtheta[tape.slot_phi_b[j] : tape.slot_phi_b[j] + k] += dphi
                else:
                    if want_param:
                        dtheta[tape.slot_imp[j] : tape.slot_imp[j] + k] += dseg
        else:  # list
            lo, hi = tape.item_ptr[i], tape.item_ptr[i + 1]
            members = [int(c) for c in tape.item_child[lo:hi] if mask[c]]
            if not members:
                if want_param:
                    dtheta[tape.list_imp[i] : tape.list_imp[i] + k] += dh[i]
                continue
            stack = h[members, :]
            if use_edge:
                scale = edge_w[members][:, None]
                stack = stack * scale
            agg = np.concatenate([stack.max(axis=0), stack.mean(axis=0)])
            dpre = dh[i] * (h[i] > 0)
            w = _w(theta, tape.list_w[i], k, 2 * k)
            if want_param:
                dw = _w(dtheta, tape.list_w[i], k, 2 * k)
                dw += np.outer(dpre, agg)
                dtheta[tape.list_b[i] : tape.list_b[i] + k] += dpre
            dagg = w.T @ dpre
            dmax, dmean = dagg[:k], dagg[k:]
            m_count = len(members)
            # max routes split equally among maximizers; mean distributes 1/m
            top = stack.max(axis=0)
            is_top = stack == top[None, :]
            share = is_top / is_top.sum(axis=0)[None, :]
            dstack = share * dmax[None, :] + dmean[None, :] / m_count
            for row, c in enumerate(members):
                if use_edge:
                    if want_edge:
                        dedge[c] += float(dstack[row] @ h[c])
                    dh[c] += edge_w[c] * dstack[row]
                else:
                    dh[c] += dstack[row]


def forward_many(
    theta: np.ndarray,
    tape: Tape,
    masks: np.ndarray,
    h: np.ndarray,
    phi: np.ndarray,
    y: np.ndarray,
    conf_out: np.ndarray,
) -> None:
    logits = np.zeros(2, dtype=np.float64)
    edge_w = np.empty(0, dtype=np.float64)
    for r in range(masks.shape[0]):
        forward(theta, tape, masks[r], edge_w, False, -1, 0, 0.0, h, phi, y, logits)
        conf_out[r] = confidence_of(logits)
