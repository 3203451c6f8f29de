"""Evaluation pipeline: explain many samples with many method combinations
and aggregate excess leaves, timing, counters and consistency."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .engine import CompiledSample, Evaluator
from .explain import MethodSpec, explain_sample
from .model import HmilModel
from .synthgen import POS, LabeledSample, excess_leaves

ALL_RANKINGS = ("greedy", "grad", "banz", "gnn", "gnn2", "rand")
ALL_SEARCHES = ("flat", "leafs", "lbyl")
ALL_STAGES = ("add", "add-rr", "add-rr-ft")


def full_method_matrix() -> list[str]:
    return [
        f"{search}-{ranking}-{stages}"
        for search in ALL_SEARCHES
        for ranking in ALL_RANKINGS
        for stages in ALL_STAGES
    ]


@dataclass
class RunConfig:
    methods: list[str]
    n_explanations: int
    tau_factor: float = 0.9
    seed: int = 0
    banz_samples: int | None = None
    gnn_steps: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "methods": list(self.methods),
            "n_explanations": self.n_explanations,
            "tau_factor": self.tau_factor,
            "seed": self.seed,
        }
        if self.banz_samples is not None:
            out["banz_samples"] = self.banz_samples
        if self.gnn_steps is not None:
            out["gnn_steps"] = self.gnn_steps
        out.update(self.extra)
        return out


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), se


def select_explained_samples(
    model: HmilModel, dataset: list[LabeledSample], n: int, seed
) -> list[LabeledSample]:
    """Correctly classified positives, shuffled deterministically."""
    positives = [s for s in dataset if s.label == POS]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(positives))
    picked: list[LabeledSample] = []
    for idx in order:
        s = positives[idx]
        if Evaluator(model, s.sample).confidence(None) >= 0.0:
            picked.append(s)
            if len(picked) == n:
                break
    return picked


def evaluate(
    model: HmilModel,
    dataset: list[LabeledSample],
    config: RunConfig,
) -> dict:
    """EvalReport over all requested methods on shared explained samples."""
    samples = select_explained_samples(
        model, dataset, config.n_explanations, config.seed
    )
    compiled = [CompiledSample(model, s.sample) for s in samples]
    rows = []
    for mi, text in enumerate(config.methods):
        overrides: dict[str, Any] = {}
        if config.banz_samples is not None:
            overrides["banz_samples"] = config.banz_samples
        if config.gnn_steps is not None:
            overrides["gnn_steps"] = config.gnn_steps
        spec = MethodSpec.parse(text, **overrides)
        excess: list[float] = []
        seconds: list[float] = []
        infs: list[float] = []
        grads: list[float] = []
        consistent = 0
        for si, (sample, cs) in enumerate(zip(samples, compiled)):
            expl = explain_sample(
                model,
                cs,
                spec,
                tau_factor=config.tau_factor,
                seed=[config.seed, mi, si],
            )
            excess.append(float(excess_leaves(expl, sample.inserted)))
            seconds.append(expl.seconds)
            infs.append(float(expl.inferences))
            grads.append(float(expl.gradients))
            consistent += _verify(model, cs, expl)
        ex_m, ex_se = _mean_se(excess)
        t_m, t_se = _mean_se(seconds)
        rows.append(
            {
                "method": text,
                "label": spec.label,
                "n": len(samples),
                "excess_mean": ex_m,
                "excess_se": ex_se,
                "seconds_mean": t_m,
                "seconds_se": t_se,
                "inferences_mean": float(np.mean(infs)) if infs else float("nan"),
                "gradients_mean": float(np.mean(grads)) if grads else float("nan"),
                "consistency_rate": consistent / len(samples) if samples else float("nan"),
            }
        )
    valid = all(r["consistency_rate"] == 1.0 for r in rows)
    return {
        "config": config.to_dict(),
        "n_samples": len(samples),
        "rows": rows,
        "valid": valid,
    }


def _verify(model: HmilModel, cs: CompiledSample, expl) -> bool:
    """Independent consistency + prefix-closure re-check of one explanation."""
    if not cs.index.is_prefix_closed(expl.node_ids):
        return False
    conf = Evaluator(model, cs).confidence(cs.index.mask_from_ids(expl.node_ids))
    return conf >= expl.tau


def format_table(report: dict) -> str:
    """Aligned text rendering of an EvalReport."""
    headers = [
        "method", "n", "excess", "time [s]", "#inf", "#grad", "consistent",
    ]
    lines = []
    rows = []
    for r in report["rows"]:
        rows.append(
            [
                r["label"],
                str(r["n"]),
                f"{r['excess_mean']:.2f}±{r['excess_se']:.2f}",
                f"{r['seconds_mean']:.3f}±{r['seconds_se']:.3f}",
                f"{r['inferences_mean']:.0f}",
                f"{r['gradients_mean']:.0f}",
                f"{r['consistency_rate']:.2f}",
            ]
        )
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)))
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(headers))))
    lines.append(f"valid: {report['valid']}")
    return "\n".join(lines)
