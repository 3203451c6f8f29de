"""Numba-jitted evaluation kernels (default backend).

Loop-level rewrite of numpy_kernels with identical contracts; both
backends are exercised against each other in the test suite.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .common import KIND_DICT, KIND_LEAF

NAME = "numba"


@njit(cache=True)
def reachability_closure(parent, mask):
    mask[0] = 1
    for i in range(1, mask.shape[0]):
        if mask[i] == 1 and mask[parent[i]] == 0:
            mask[i] = 0


@njit(cache=True)
def ancestor_closure(parent, mask):
    for i in range(mask.shape[0] - 1, 0, -1):
        if mask[i] == 1:
            mask[parent[i]] = 1
    mask[0] = 1


@njit(cache=True)
def forward(theta, tape, mask, edge_w, use_edge, ov_node, ov_coord, ov_delta,
            h, phi, y, logits):
    k = tape.k
    for i in range(tape.n - 1, -1, -1):
        kind = tape.kind[i]
        if kind == KIND_LEAF:
            w_off = tape.leaf_w[i]
            b_off = tape.leaf_b[i]
            d = tape.leaf_dim[i]
            lo = tape.enc_ptr[i]
            hi = tape.enc_ptr[i + 1]
            for r in range(k):
                acc = theta[b_off + r]
                row = w_off + r * d
                for p in range(lo, hi):
                    acc += theta[row + tape.enc_idx[p]] * tape.enc_val[p]
                h[i, r] = acc if acc > 0.0 else 0.0
        elif kind == KIND_DICT:
            s0 = tape.slot_ptr[i]
            s1 = tape.slot_ptr[i + 1]
            nslots = s1 - s0
            z = np.empty(nslots * k, dtype=np.float64)
            for j in range(s0, s1):
                c = tape.slot_child[j]
                imp_off = tape.slot_imp[j]
                base = (j - s0) * k
                if c >= 0 and mask[c] == 1:
                    pw = tape.slot_phi_w[j]
                    pb = tape.slot_phi_b[j]
                    for r in range(k):
                        acc = theta[pb + r]
                        row = pw + r * k
                        for q in range(k):
                            acc += theta[row + q] * h[c, q]
                        phi[j, r] = acc if acc > 0.0 else 0.0
                    if use_edge:
                        m = edge_w[c]
                        for r in range(k):
                            z[base + r] = m * phi[j, r] + (1.0 - m) * theta[imp_off + r]
                    else:
                        for r in range(k):
                            z[base + r] = phi[j, r]
                else:
                    for r in range(k):
                        z[base + r] = theta[imp_off + r]
            w_off = tape.cat_w[i]
            b_off = tape.cat_b[i]
            cols = nslots * k
            for r in range(k):
                acc = theta[b_off + r]
                row = w_off + r * cols
                for q in range(cols):
                    acc += theta[row + q] * z[q]
                h[i, r] = acc if acc > 0.0 else 0.0
        else:  # list
            lo = tape.item_ptr[i]
            hi = tape.item_ptr[i + 1]
            count = 0
            for p in range(lo, hi):
                if mask[tape.item_child[p]] == 1:
                    count += 1
            if count == 0:
                imp_off = tape.list_imp[i]
                for r in range(k):
                    h[i, r] = theta[imp_off + r]
            else:
                agg = np.empty(2 * k, dtype=np.float64)
                for r in range(k):
                    mx = -1.0e300
                    sm = 0.0
                    for p in range(lo, hi):
                        c = tape.item_child[p]
                        if mask[c] == 1:
                            v = h[c, r]
                            if use_edge:
                                v *= edge_w[c]
                            if v > mx:
                                mx = v
                            sm += v
                    agg[r] = mx
                    agg[k + r] = sm / count
                w_off = tape.list_w[i]
                b_off = tape.list_b[i]
                for r in range(k):
                    acc = theta[b_off + r]
                    row = w_off + r * 2 * k
                    for q in range(2 * k):
                        acc += theta[row + q] * agg[q]
                    h[i, r] = acc if acc > 0.0 else 0.0
        if i == ov_node:
            h[i, ov_coord] += ov_delta
    # head
    w1 = tape.head_w1
    b1 = tape.head_b1
    for r in range(k):
        acc = theta[b1 + r]
        row = w1 + r * k
        for q in range(k):
            acc += theta[row + q] * h[0, q]
        y[r] = acc if acc > 0.0 else 0.0
    w2 = tape.head_w2
    b2 = tape.head_b2
    for j in range(2):
        acc = theta[b2 + j]
        row = w2 + j * k
        for q in range(k):
            acc += theta[row + q] * y[q]
        logits[j] = acc


@njit(cache=True)
def backward(theta, tape, mask, edge_w, use_edge, h, phi, y, dlogits,
             want_param, want_edge, dh, dtheta, dedge):
    k = tape.k
    for i in range(tape.n):
        for r in range(k):
            dh[i, r] = 0.0
    # head
    dy = np.zeros(k, dtype=np.float64)
    w2 = tape.head_w2
    b2 = tape.head_b2
    for j in range(2):
        row = w2 + j * k
        for r in range(k):
            dy[r] += dlogits[j] * theta[row + r]
        if want_param:
            for r in range(k):
                dtheta[row + r] += dlogits[j] * y[r]
            dtheta[b2 + j] += dlogits[j]
    for r in range(k):
        if y[r] <= 0.0:
            dy[r] = 0.0
    w1 = tape.head_w1
    b1 = tape.head_b1
    for r in range(k):
        row = w1 + r * k
        for q in range(k):
            dh[0, q] += dy[r] * theta[row + q]
        if want_param:
            for q in range(k):
                dtheta[row + q] += dy[r] * h[0, q]
            dtheta[b1 + r] += dy[r]

    for i in range(tape.n):
        live = False
        for r in range(k):
            if dh[i, r] != 0.0:
                live = True
                break
        if not live:
            continue
        kind = tape.kind[i]
        if kind == KIND_LEAF:
            if want_param:
                b_off = tape.leaf_b[i]
                w_off = tape.leaf_w[i]
                d = tape.leaf_dim[i]
                lo = tape.enc_ptr[i]
                hi = tape.enc_ptr[i + 1]
                for r in range(k):
                    g = dh[i, r] if h[i, r] > 0.0 else 0.0
                    if g == 0.0:
                        continue
                    dtheta[b_off + r] += g
                    row = w_off + r * d
                    for p in range(lo, hi):
                        dtheta[row + tape.enc_idx[p]] += g * tape.enc_val[p]
        elif kind == KIND_DICT:
            s0 = tape.slot_ptr[i]
            s1 = tape.slot_ptr[i + 1]
            nslots = s1 - s0
            cols = nslots * k
            dpre = np.empty(k, dtype=np.float64)
            for r in range(k):
                dpre[r] = dh[i, r] if h[i, r] > 0.0 else 0.0
            w_off = tape.cat_w[i]
            dz = np.zeros(cols, dtype=np.float64)
            for r in range(k):
                if dpre[r] == 0.0:
                    continue
                row = w_off + r * cols
                for q in range(cols):
                    dz[q] += dpre[r] * theta[row + q]
            if want_param:
                z = np.empty(cols, dtype=np.float64)
                for j in range(s0, s1):
                    c = tape.slot_child[j]
                    imp_off = tape.slot_imp[j]
                    base = (j - s0) * k
                    if c >= 0 and mask[c] == 1:
                        if use_edge:
                            m = edge_w[c]
                            for r in range(k):
                                z[base + r] = m * phi[j, r] + (1.0 - m) * theta[imp_off + r]
                        else:
                            for r in range(k):
                                z[base + r] = phi[j, r]
                    else:
                        for r in range(k):
                            z[base + r] = theta[imp_off + r]
                b_off = tape.cat_b[i]
                for r in range(k):
                    if dpre[r] == 0.0:
                        continue
                    row = w_off + r * cols
                    for q in range(cols):
                        dtheta[row + q] += dpre[r] * z[q]
                    dtheta[b_off + r] += dpre[r]
            for j in range(s0, s1):
                c = tape.slot_child[j]
                base = (j - s0) * k
                if c >= 0 and mask[c] == 1:
                    imp_off = tape.slot_imp[j]
                    pw = tape.slot_phi_w[j]
                    pb = tape.slot_phi_b[j]
                    if use_edge:
                        m = edge_w[c]
                        if want_edge:
                            acc = 0.0
                            for r in range(k):
                                acc += dz[base + r] * (phi[j, r] - theta[imp_off + r])
                            dedge[c] += acc
                        if want_param:
                            for r in range(k):
                                dtheta[imp_off + r] += (1.0 - m) * dz[base + r]
                    for r in range(k):
                        g = dz[base + r]
                        if use_edge:
                            g *= edge_w[c]
                        if phi[j, r] <= 0.0:
                            g = 0.0
                        if g == 0.0:
                            continue
                        row = pw + r * k
                        for q in range(k):
                            dh[c, q] += g * theta[row + q]
                        if want_param:
                            for q in range(k):
                                dtheta[row + q] += g * h[c, q]
                            dtheta[pb + r] += g
                else:
                    if want_param:
                        imp_off = tape.slot_imp[j]
                        for r in range(k):
                            dtheta[imp_off + r] += dz[base + r]
        else:  # list
            lo = tape.item_ptr[i]
            hi = tape.item_ptr[i + 1]
            count = 0
            for p in range(lo, hi):
                if mask[tape.item_child[p]] == 1:
                    count += 1
            if count == 0:
                if want_param:
                    imp_off = tape.list_imp[i]
                    for r in range(k):
                        dtheta[imp_off + r] += dh[i, r]
                continue
            dpre = np.empty(k, dtype=np.float64)
            for r in range(k):
                dpre[r] = dh[i, r] if h[i, r] > 0.0 else 0.0
            # rebuild the max/mean aggregate and per-coordinate maximizer counts
            agg = np.empty(2 * k, dtype=np.float64)
            tie_count = np.zeros(k, dtype=np.int64)
            for r in range(k):
                mx = -1.0e300
                sm = 0.0
                for p in range(lo, hi):
                    c = tape.item_child[p]
                    if mask[c] == 1:
                        v = h[c, r]
                        if use_edge:
                            v *= edge_w[c]
                        if v > mx:
                            mx = v
                        sm += v
                agg[r] = mx
                agg[k + r] = sm / count
                cnt = 0
                for p in range(lo, hi):
                    c = tape.item_child[p]
                    if mask[c] == 1:
                        v = h[c, r]
                        if use_edge:
                            v *= edge_w[c]
                        if v == mx:
                            cnt += 1
                tie_count[r] = cnt
            w_off = tape.list_w[i]
            b_off = tape.list_b[i]
            if want_param:
                for r in range(k):
                    if dpre[r] == 0.0:
                        continue
                    row = w_off + r * 2 * k
                    for q in range(2 * k):
                        dtheta[row + q] += dpre[r] * agg[q]
                    dtheta[b_off + r] += dpre[r]
            dagg = np.zeros(2 * k, dtype=np.float64)
            for r in range(k):
                if dpre[r] == 0.0:
                    continue
                row = w_off + r * 2 * k
                for q in range(2 * k):
                    dagg[q] += dpre[r] * theta[row + q]
            for p in range(lo, hi):
                c = tape.item_child[p]
                if mask[c] == 0:
                    continue
                for r in range(k):
                    v = h[c, r]
                    if use_edge:
                        v *= edge_w[c]
                    g = dagg[k + r] / count
                    if v == agg[r]:
                        g += dagg[r] / tie_count[r]
                    if g == 0.0:
                        continue
                    if use_edge:
                        if want_edge:
                            dedge[c] += g * h[c, r]
                        dh[c, r] += g * edge_w[c]
                    else:
                        dh[c, r] += g


@njit(cache=True)
def forward_many(theta, tape, masks, h, phi, y, conf_out):
    logits = np.zeros(2, dtype=np.float64)
    edge_w = np.empty(0, dtype=np.float64)
    for row in range(masks.shape[0]):
        forward(theta, tape, masks[row], edge_w, False, -1, 0, 0.0, h, phi, y, logits)
        m = logits[0] if logits[0] > logits[1] else logits[1]
        ea = np.exp(logits[0] - m)
        eb = np.exp(logits[1] - m)
        conf_out[row] = (ea - eb) / (ea + eb)
