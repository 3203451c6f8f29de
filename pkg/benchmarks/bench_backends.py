#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot paths (masked forward, forward+backward, batched
forward over many masks) on device-scan style samples.  Run with

    python benchmarks/bench_backends.py [--n-samples 20] [--repeats 200]

The active backend for library use is chosen by HMILEX_BACKEND; this
script imports both kernel modules directly and compares them in-process.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import hmilex as hx
from hmilex.backends import alloc_buffers
from hmilex.backends import numpy_kernels
from hmilex.engine import CompiledSample
from hmilex.model import build_model

try:
    from hmilex.backends import numba_kernels
except ImportError:
    numba_kernels = None


def devicelike_docs(n: int, seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    names = [f"device-model-{i:04d}" for i in range(160)]
    docs = []
    for _ in range(n):
        d = {"mac": "".join(rng.choice(list("0123456789abcdef"), 12))}
        if rng.random() < 0.8:
            d["services"] = [
                {"port": float(rng.integers(1, 1024)), "protocol": str(rng.choice(["tcp", "udp"]))}
                for _ in range(rng.integers(1, 6))
            ]
        if rng.random() < 0.7:
            d["upnp"] = [
                {"model_name": str(rng.choice(names)),
                 "services": [f"svc-{rng.integers(40):02d}" for _ in range(rng.integers(1, 5))]}
                for _ in range(rng.integers(1, 4))
            ]
        docs.append(d)
    return docs


def bench_kernel(kern, theta, compiled, masks_per_sample, repeats):
    """Returns seconds per call for (forward, forward+backward, batched)."""
    fwd_total = bwd_total = many_total = 0.0
    calls = 0
    dlogits = np.array([1.0, -1.0])
    for cs in compiled:
        tape = cs.tape
        h, phi, y, logits = alloc_buffers(tape)
        dh = np.zeros_like(h)
        dtheta = np.zeros_like(theta)
        dedge = np.zeros(cs.n)
        edge = np.empty(0, dtype=np.float64)
        mask = np.ones(cs.n, dtype=np.uint8)
        # warm up (jit compile on first call)
        kern.forward(theta, tape, mask, edge, False, -1, 0, 0.0, h, phi, y, logits)
        t0 = time.perf_counter()
        for _ in range(repeats):
            kern.forward(theta, tape, mask, edge, False, -1, 0, 0.0, h, phi, y, logits)
        fwd_total += time.perf_counter() - t0
        t0 = time.perf_counter()
        for _ in range(repeats):
            kern.forward(theta, tape, mask, edge, False, -1, 0, 0.0, h, phi, y, logits)
            kern.backward(theta, tape, mask, edge, False, h, phi, y, dlogits,
                          True, False, dh, dtheta, dedge)
        bwd_total += time.perf_counter() - t0
        rng = np.random.default_rng(0)
        masks = rng.integers(0, 2, size=(masks_per_sample, cs.n)).astype(np.uint8)
        masks[:, 0] = 1
        conf = np.zeros(masks_per_sample)
        kern.forward_many(theta, tape, masks, h, phi, y, conf)
        t0 = time.perf_counter()
        kern.forward_many(theta, tape, masks, h, phi, y, conf)
        many_total += time.perf_counter() - t0
        calls += repeats
    return (
        fwd_total / calls,
        bwd_total / calls,
        many_total / (len(compiled) * masks_per_sample),
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-samples", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--masks", type=int, default=500)
    args = parser.parse_args()

    docs = devicelike_docs(200, seed=1)
    schema = hx.infer_schema(docs)
    model = build_model(schema, k=5, rng_seed=0)
    rng = np.random.default_rng(2)
    model.theta[:] += rng.normal(0, 0.3, model.theta.size)
    compiled = [CompiledSample(model, hx.from_json(d)) for d in docs[: args.n_samples]]
    sizes = [cs.n for cs in compiled]
    print(f"{len(compiled)} samples, {np.mean(sizes):.1f} nodes on average, k={model.k}")
    print(f"{'backend':8s}  {'forward':>12s}  {'fwd+bwd':>12s}  {'batched fwd':>12s}")

    rows = {}
    backends = [("numpy", numpy_kernels)]
    if numba_kernels is not None:
        backends.append(("numba", numba_kernels))
    for name, kern in backends:
        fwd, bwd, many = bench_kernel(kern, model.theta, compiled, args.masks, args.repeats)
        rows[name] = (fwd, bwd, many)
        print(f"{name:8s}  {fwd * 1e6:9.1f} us  {bwd * 1e6:9.1f} us  {many * 1e6:9.1f} us")
    if len(rows) == 2:
        f0, b0, m0 = rows["numpy"]
        f1, b1, m1 = rows["numba"]
        print(f"{'speedup':8s}  {f0 / f1:10.1f}x  {b0 / b1:10.1f}x  {m0 / m1:10.1f}x")


if __name__ == "__main__":
    main()
