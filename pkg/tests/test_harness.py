import json

import numpy as np
import pytest

import hmilex as hx
from hmilex.cli import main
from hmilex.data import to_json
from hmilex.engine import classify
from hmilex.harness import RunConfig, evaluate, format_table, full_method_matrix

from conftest import tiny_docs


def test_full_method_matrix_size():
    matrix = full_method_matrix()
    assert len(matrix) == 3 * 6 * 3
    assert "flat-banz-add-rr-ft" in matrix
    assert "lbyl-greedy-add" in matrix


def test_evaluate_report_shape(tiny_trained):
    report = evaluate(
        tiny_trained["model"],
        tiny_trained["data"],
        RunConfig(methods=["flat-banz-add", "lbyl-grad-add-rr"], n_explanations=8,
                  seed=1, banz_samples=100),
    )
    assert report["n_samples"] == 8
    assert len(report["rows"]) == 2
    for row in report["rows"]:
        assert row["consistency_rate"] == 1.0
        assert row["n"] == 8
        assert np.isfinite(row["excess_mean"])
    assert report["valid"] is True
    assert report["config"]["seed"] == 1
    text = format_table(report)
    assert "Flat/Banz/Add" in text and "valid: True" in text


def test_evaluate_deterministic_numeric_fields(tiny_trained):
    cfg = RunConfig(methods=["flat-rand-add-rr"], n_explanations=6, seed=3,
                    banz_samples=50)
    a = evaluate(tiny_trained["model"], tiny_trained["data"], cfg)
    b = evaluate(tiny_trained["model"], tiny_trained["data"], cfg)
    for ra, rb in zip(a["rows"], b["rows"]):
        for key in ("excess_mean", "excess_se", "inferences_mean",
                    "gradients_mean", "consistency_rate"):
            assert ra[key] == rb[key]


# -- CLI end to end ----------------------------------------------------------


@pytest.fixture(scope="module")
def cli_artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.jsonl"
    with open(corpus, "w") as fh:
        for doc in tiny_docs(300, seed=19):
            fh.write(json.dumps(doc) + "\n")
    schema_path = root / "schema.json"
    data_path = root / "data.jsonl"
    model_path = root / "model.json"
    assert main(["infer-schema", "--input", str(corpus), "--out", str(schema_path),
                 "--pretty", str(root / "schema.txt")]) == 0
    assert main(["gen-data", "--schema", str(schema_path), "--kind", "i",
                 "--n", "300", "--seed", "2", "--out", str(data_path)]) == 0
    assert main(["train", "--schema", str(schema_path), "--dataset", str(data_path),
                 "--concept", str(data_path) + ".concept.json",
                 "--out", str(model_path), "--steps", "400", "--n-models", "2",
                 "--seed", "4", "--history-out", str(root / "hist.json")]) == 0
    return root, schema_path, data_path, model_path


def test_cli_schema_idempotent(cli_artifacts, capsys):
    root, schema_path, _, _ = cli_artifacts
    first = schema_path.read_bytes()
    again = root / "schema2.json"
    assert main(["infer-schema", "--input", str(root / "corpus.jsonl"),
                 "--out", str(again)]) == 0
    assert again.read_bytes() == first


def test_cli_schema_empty_corpus(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    code = main(["infer-schema", "--input", str(empty), "--out", str(tmp_path / "s.json")])
    assert code == 2
    assert "empty corpus" in capsys.readouterr().err


def test_cli_gen_data_deterministic(cli_artifacts):
    root, schema_path, data_path, _ = cli_artifacts
    other = root / "data2.jsonl"
    assert main(["gen-data", "--schema", str(schema_path), "--kind", "i",
                 "--n", "300", "--seed", "2", "--out", str(other)]) == 0
    assert other.read_bytes() == data_path.read_bytes()


def test_cli_gen_data_writes_concept(cli_artifacts):
    _, _, data_path, _ = cli_artifacts
    concept = json.loads((data_path.parent / "data.jsonl.concept.json").read_text())
    assert concept["kind"] == "i"
    assert len(concept["fragments"]) == 1


def test_cli_train_artifacts(cli_artifacts):
    root, schema_path, _, model_path = cli_artifacts
    doc = json.loads(model_path.read_text())
    assert doc["format"] == "hmilex-model"
    assert doc["k"] == 5
    hist = json.loads((root / "hist.json").read_text())
    assert len(hist["histories"]) == 2
    assert len(hist["histories"][0]["loss"]) == 400


def test_cli_explain_positive_sample(cli_artifacts):
    root, schema_path, data_path, model_path = cli_artifacts
    schema = hx.schema.loads(schema_path.read_text())
    model = hx.load_model(model_path, schema)
    from hmilex.synthgen import load_dataset

    data = load_dataset(data_path)
    positive = next(
        s for s in data
        if s.label == "pos" and classify(model, s.sample).confidence > 0
    )
    sample_path = root / "sample.json"
    sample_path.write_text(json.dumps(to_json(positive.sample)))
    out = root / "expl.json"
    assert main(["explain", "--model", str(model_path), "--schema", str(schema_path),
                 "--sample", str(sample_path), "--method", "lbyl-banz-add-rr",
                 "--seed", "0", "--out", str(out)]) == 0
    pruned = json.loads(out.read_text())
    meta = json.loads((root / "expl.json.meta.json").read_text())
    assert meta["confidence"] >= meta["tau"]
    assert meta["leaf_count"] >= 0
    assert meta["inferences"] > 0
    # the pruned document is a genuine subtree: re-classifying it stays above tau
    conf = classify(model, hx.from_json(pruned)).confidence
    assert conf >= meta["tau"] - 1e-9


def test_cli_explain_negative_sample(cli_artifacts, capsys):
    root, schema_path, data_path, model_path = cli_artifacts
    schema = hx.schema.loads(schema_path.read_text())
    model = hx.load_model(model_path, schema)
    from hmilex.synthgen import load_dataset

    negative = next(
        s for s in load_dataset(data_path)
        if s.label == "neg" and classify(model, s.sample).confidence < 0
    )
    sample_path = root / "neg.json"
    sample_path.write_text(json.dumps(to_json(negative.sample)))
    code = main(["explain", "--model", str(model_path), "--schema", str(schema_path),
                 "--sample", str(sample_path), "--out", str(root / "x.json")])
    assert code == 2
    assert "not classified positive" in capsys.readouterr().err


def test_cli_evaluate(cli_artifacts, capsys):
    root, schema_path, data_path, model_path = cli_artifacts
    out = root / "report.json"
    assert main(["evaluate", "--model", str(model_path), "--schema", str(schema_path),
                 "--dataset", str(data_path),
                 "--methods", "flat-banz-add,flat-rand-add,lbyl-greedy-add-rr",
                 "--n-explanations", "6", "--seed", "1",
                 "--banz-samples", "100", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["valid"] is True
    assert report["config"]["banz_samples"] == 100
    assert {r["method"] for r in report["rows"]} == {
        "flat-banz-add", "flat-rand-add", "lbyl-greedy-add-rr",
    }
    text = capsys.readouterr().out
    assert "consistent" in text
