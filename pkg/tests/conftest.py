"""Shared corpora, schemas and trained models for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

import hmilex as hx
from hmilex.train import TrainConfig, select_best_model


def devicelike_docs(n: int, seed: int = 0) -> list[dict]:
    """Network-scan style documents: mixed encoders, depth 4, wide lists."""
    rng = np.random.default_rng(seed)
    model_names = [f"device-model-{i:04d}" for i in range(160)]  # trigram
    manufacturers = ["acme", "globex", "hooli", "initech", "stark", "umbrella"]
    svc_names = [f"svc-{i:02d}" for i in range(40)]
    dhcp_params = [f"param-{i}" for i in range(25)]
    ports = [21.0, 22.0, 53.0, 80.0, 443.0, 1900.0, 8080.0]
    hostnames = [f"host-{i:05d}" for i in range(500)]  # trigram
    docs = []
    for _ in range(n):
        d = {}
        if rng.random() < 0.9:
            d["mac"] = "".join(rng.choice(list("0123456789abcdef"), 12))
        if rng.random() < 0.5:
            d["hostname"] = str(rng.choice(hostnames))
        if rng.random() < 0.6:
            d["wifi"] = bool(rng.random() < 0.5)
        if rng.random() < 0.7:
            d["port_count"] = float(rng.integers(0, 6))
        if rng.random() < 0.75:
            d["services"] = [
                {
                    "port": float(rng.choice(ports)),
                    "protocol": str(rng.choice(["tcp", "udp"])),
                }
                for _ in range(rng.integers(1, 6))
            ]
        if rng.random() < 0.65:
            d["upnp"] = [
                {
                    "model_name": str(rng.choice(model_names)),
                    "manufacturer": str(rng.choice(manufacturers)),
                    "services": [str(rng.choice(svc_names)) for _ in range(rng.integers(1, 5))],
                }
                for _ in range(rng.integers(1, 4))
            ]
        if rng.random() < 0.4:
            d["dhcp"] = [
                {"paramlist": str(rng.choice(dhcp_params))}
                for _ in range(rng.integers(1, 3))
            ]
        docs.append(d)
    return docs


def tiny_docs(n: int, seed: int = 0) -> list[dict]:
    """Small flat-ish documents: samples stay under ~12 maskable nodes."""
    rng = np.random.default_rng(seed)
    docs = []
    for _ in range(n):
        d = {}
        if rng.random() < 0.8:
            d["a"] = float(rng.integers(0, 4))
        if rng.random() < 0.7:
            d["b"] = str(rng.choice(["red", "green", "blue"]))
        if rng.random() < 0.5:
            d["c"] = bool(rng.random() < 0.5)
        if rng.random() < 0.7:
            d["s"] = [
                {"p": str(rng.choice(["x", "y", "z", "w"]))}
                for _ in range(rng.integers(1, 4))
            ]
        docs.append(d)
    return docs


@pytest.fixture(scope="session")
def devicelike_schema():
    return hx.infer_schema(devicelike_docs(500, seed=11))


@pytest.fixture(scope="session")
def tiny_schema():
    return hx.infer_schema(tiny_docs(300, seed=7))


@pytest.fixture(scope="session")
def tiny_trained(tiny_schema):
    """A quickly trained model on a single-path concept over the tiny schema."""
    rng = np.random.default_rng(21)
    concept = hx.make_concept(tiny_schema, "i", rng)
    data = hx.generate_dataset(tiny_schema, concept, 400, seed=3)
    pairs = [(s.sample, s.label) for s in data]
    sel = select_best_model(
        tiny_schema, pairs, list(concept.fragments), n=3,
        config=TrainConfig(steps=400), k=5, base_seed=5,
    )
    return {"schema": tiny_schema, "model": sel.model, "concept": concept, "data": data}


@pytest.fixture(scope="session")
def device_trained(devicelike_schema):
    """A trained model over the device-like schema, shared by slower tests."""
    rng = np.random.default_rng(4)
    concept = hx.make_concept(devicelike_schema, "i", rng)
    data = hx.generate_dataset(devicelike_schema, concept, 600, seed=9)
    pairs = [(s.sample, s.label) for s in data]
    sel = select_best_model(
        devicelike_schema, pairs, list(concept.fragments), n=3,
        config=TrainConfig(steps=500), k=5, base_seed=1,
    )
    return {
        "schema": devicelike_schema,
        "model": sel.model,
        "concept": concept,
        "data": data,
    }
