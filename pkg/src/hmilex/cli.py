"""Command-line front end: infer-schema, gen-data, train, explain, evaluate."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import schema as sch
from .data import from_json
from .engine import classify
from .errors import HmilexError, InconsistentInput
from .explain import MethodSpec, explain_sample
from .harness import RunConfig, evaluate, format_table
from .model import load_model, save_model
from .synthgen import (
    CONCEPT_KINDS,
    generate_dataset,
    load_concept,
    load_dataset,
    make_concept,
    save_concept,
    save_dataset,
)
from .train import TrainConfig, select_best_model, training_accuracy


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def cmd_infer_schema(args) -> int:
    schema = sch.infer_schema(sch.read_jsonl(args.input))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(sch.dumps(schema))
        fh.write("\n")
    text = sch.pretty(schema)
    if args.pretty:
        with open(args.pretty, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(f"schema written to {args.out}", file=sys.stderr)
    return 0


def _load_schema(path) -> sch.SchemaNode:
    with open(path, "r", encoding="utf-8") as fh:
        return sch.loads(fh.read())


def cmd_gen_data(args) -> int:
    schema = _load_schema(args.schema)
    rng = np.random.default_rng(args.seed)
    concept = make_concept(schema, args.kind, rng)
    dataset = generate_dataset(
        schema, concept, args.n, positive_fraction=args.positive_fraction,
        seed=args.seed,
    )
    save_dataset(dataset, args.out)
    concept_out = args.concept_out or f"{args.out}.concept.json"
    save_concept(concept, concept_out)
    n_pos = sum(1 for s in dataset if s.label == "pos")
    print(f"{len(dataset)} samples ({n_pos} pos / {len(dataset) - n_pos} neg), "
          f"concept kind {args.kind} -> {concept_out}")
    return 0


def cmd_train(args) -> int:
    schema = _load_schema(args.schema)
    dataset = load_dataset(args.dataset)
    pairs = [(s.sample, s.label) for s in dataset]
    concepts = list(load_concept(args.concept).fragments) if args.concept else []
    config = TrainConfig(steps=args.steps, seed=args.seed)
    result = select_best_model(
        schema, pairs, concepts, n=args.n_models, config=config, k=args.k,
        base_seed=args.seed,
    )
    save_model(result.model, args.out)
    accuracy = training_accuracy(result.model, pairs)
    report = result.to_dict()
    report["training_accuracy"] = accuracy
    if args.history_out:
        _write_json(args.history_out, {
            "histories": [h.to_dict() for h in result.histories],
        })
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def cmd_explain(args) -> int:
    schema = _load_schema(args.schema)
    model = load_model(args.model, schema)
    with open(args.sample, "r", encoding="utf-8") as fh:
        sample = from_json(json.load(fh))
    conf = classify(model, sample).confidence
    if conf < 0.0:
        print("sample not classified positive", file=sys.stderr)
        return 2
    spec = MethodSpec.parse(args.method)
    expl = explain_sample(
        model, sample, spec, tau_factor=args.tau_factor, seed=args.seed
    )
    _write_json(args.out, expl.to_json())
    meta = expl.metadata()
    meta["seed"] = args.seed
    _write_json(f"{args.out}.meta.json", meta)
    print(f"explanation with {expl.leaf_count} leaves at confidence "
          f"{expl.confidence:.4f} (tau {expl.tau:.4f}) -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    schema = _load_schema(args.schema)
    model = load_model(args.model, schema)
    dataset = load_dataset(args.dataset)
    config = RunConfig(
        methods=[m.strip() for m in args.methods.split(",") if m.strip()],
        n_explanations=args.n_explanations,
        tau_factor=args.tau_factor,
        seed=args.seed,
        banz_samples=args.banz_samples,
        gnn_steps=args.gnn_steps,
    )
    report = evaluate(model, dataset, config)
    if args.out:
        _write_json(args.out, report)
    print(format_table(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmilex",
        description="Train tree classifiers on JSON data and explain them "
        "with minimal consistent subtrees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("infer-schema", help="infer a schema from a JSON-lines corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pretty", help="write the pretty print here instead of stdout")
    p.set_defaults(func=cmd_infer_schema)

    p = sub.add_parser("gen-data", help="generate a labeled synthetic dataset")
    p.add_argument("--schema", required=True)
    p.add_argument("--kind", required=True, choices=sorted(CONCEPT_KINDS))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--positive-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--concept-out")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train candidate models and keep the best")
    p.add_argument("--schema", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--concept", help="concept file used by the selection criteria")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--n-models", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--history-out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="explain one positively classified sample")
    p.add_argument("--model", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--sample", required=True)
    p.add_argument("--method", default="lbyl-banz-add-rr")
    p.add_argument("--tau-factor", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="run method combinations and report excess leaves")
    p.add_argument("--model", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--methods", required=True,
                   help="comma-separated specs like flat-banz-add-rr")
    p.add_argument("--n-explanations", type=int, default=100)
    p.add_argument("--tau-factor", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--banz-samples", type=int)
    p.add_argument("--gnn-steps", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InconsistentInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HmilexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
