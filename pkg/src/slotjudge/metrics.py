"""Evaluation metrics: property-wise, sample-wise, dependency-slot and
position-wise accuracy, plus the pairwise ranking error rate."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence


class MetricsError(ValueError):
    pass


@dataclass
class EvalReport:
    acc_property: float
    acc_sample: float
    acc_dep: Optional[float] = None
    error_rank: Optional[float] = None
    per_position_accuracy: list[float] = field(default_factory=list)
    n_samples: int = 0
    n_properties: int = 0
    tie_rate: Optional[float] = None
    forward_passes_per_sample: Optional[float] = None
    samples_per_second: Optional[float] = None

    def __post_init__(self):
        # sample-wise accuracy can never exceed property-wise accuracy
        assert self.acc_sample <= self.acc_property + 1e-12

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def compute_accuracies(
    preds: Sequence[Sequence[str]],
    golds: Sequence[Sequence[str]],
    kinds: Optional[Sequence[Sequence[str]]] = None,
) -> EvalReport:
    """Per-sample aligned prediction/gold lists; `kinds` tags dependency slots."""
    if len(preds) != len(golds):
        raise MetricsError("prediction/gold sample counts differ")
    n_props = n_correct = n_samples_all = 0
    dep_total = dep_correct = 0
    pos_total: list[int] = []
    pos_correct: list[int] = []
    for i, (p, g) in enumerate(zip(preds, golds)):
        if len(p) != len(g):
            raise MetricsError(f"misaligned lengths in sample {i}")
        k = kinds[i] if kinds is not None else ["literal"] * len(g)
        all_ok = True
        for slot, (pi, gi) in enumerate(zip(p, g)):
            ok = pi == gi
            n_props += 1
            n_correct += ok
            all_ok &= ok
            if slot >= len(pos_total):
                pos_total.append(0)
                pos_correct.append(0)
            pos_total[slot] += 1
            pos_correct[slot] += ok
            if k[slot] == "dependency":
                dep_total += 1
                dep_correct += ok
        n_samples_all += all_ok
    if n_props == 0:
        raise MetricsError("no properties to score")
    return EvalReport(
        acc_property=n_correct / n_props,
        acc_sample=n_samples_all / len(preds),
        acc_dep=dep_correct / dep_total if dep_total else None,
        per_position_accuracy=[c / t for c, t in zip(pos_correct, pos_total)],
        n_samples=len(preds),
        n_properties=n_props,
    )


def compute_error_rank(
    pair_predictions: Sequence[str], pair_labels: Sequence[str]
) -> float:
    """Fraction of pairs ranked wrongly ("first" vs "second")."""
    if len(pair_predictions) != len(pair_labels):
        raise MetricsError("prediction/label pair counts differ")
    if not pair_labels:
        raise MetricsError("no pairs to score")
    wrong = sum(p != l for p, l in zip(pair_predictions, pair_labels))
    return wrong / len(pair_labels)
