"""
Evaluation metrics and the shared report schema.

Definitions mirror the pipeline's evaluator exactly, and the emitted JSON
object is interchangeable with its reports: sample precision is the mean
of |P∩G|/|P|, F1-micro pools TP/FP/FN over (sample, label) pairs, and
F1-macro is the unweighted mean of the 12 per-label F1 values with
all-zero labels contributing 0.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .labels import CODES, N_LABELS


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class LabelMetrics:
    code: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    f1_micro: float
    f1_macro: float
    per_label: tuple[LabelMetrics, ...]
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "f1_micro": self.f1_micro,
            "f1_macro": self.f1_macro,
            "per_label": [asdict(lm) for lm in self.per_label],
            "n_samples": self.n_samples,
        }


METRICS_REPORT_SCHEMA = {
    "type": "object",
    "required": ["precision", "f1_micro", "f1_macro", "per_label", "n_samples"],
    "additionalProperties": False,
    "properties": {
        "precision": {"type": "number", "minimum": 0, "maximum": 1},
        "f1_micro": {"type": "number", "minimum": 0, "maximum": 1},
        "f1_macro": {"type": "number", "minimum": 0, "maximum": 1},
        "n_samples": {"type": "integer", "minimum": 0},
        "per_label": {
            "type": "array",
            "minItems": N_LABELS,
            "maxItems": N_LABELS,
            "items": {
                "type": "object",
                "required": ["code", "precision", "recall", "f1", "support"],
                "additionalProperties": False,
                "properties": {
                    "code": {"type": "string", "enum": list(CODES)},
                    "precision": {"type": "number", "minimum": 0, "maximum": 1},
                    "recall": {"type": "number", "minimum": 0, "maximum": 1},
                    "f1": {"type": "number", "minimum": 0, "maximum": 1},
                    "support": {"type": "integer", "minimum": 0},
                },
            },
        },
    },
}


def validate_metrics_report(obj: dict) -> None:
    import jsonschema

    jsonschema.validate(obj, METRICS_REPORT_SCHEMA)


def evaluate(gold, pred) -> MetricsReport:
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold vs {len(pred)} predictions")
    gold_sets = [frozenset(g) for g in gold]
    pred_sets = [frozenset(p) for p in pred]
    for i, p in enumerate(pred_sets):
        if not p:
            raise ValueError(f"prediction {i} is empty; predictions must be non-empty")

    precision = (
        sum(len(p & g) / len(p) for p, g in zip(pred_sets, gold_sets)) / len(pred_sets)
        if pred_sets
        else 0.0
    )

    tp = {c: 0 for c in CODES}
    fp = {c: 0 for c in CODES}
    fn = {c: 0 for c in CODES}
    for p, g in zip(pred_sets, gold_sets):
        for c in CODES:
            if c in p and c in g:
                tp[c] += 1
            elif c in p:
                fp[c] += 1
            elif c in g:
                fn[c] += 1

    tp_all, fp_all, fn_all = sum(tp.values()), sum(fp.values()), sum(fn.values())
    denom = 2 * tp_all + fp_all + fn_all
    f1_micro = 2 * tp_all / denom if denom else 0.0

    per_label = []
    for c in CODES:
        p_den, r_den = tp[c] + fp[c], tp[c] + fn[c]
        label_p = tp[c] / p_den if p_den else 0.0
        label_r = tp[c] / r_den if r_den else 0.0
        label_f = 2 * label_p * label_r / (label_p + label_r) if (label_p + label_r) else 0.0
        per_label.append(LabelMetrics(c, label_p, label_r, label_f, r_den))
    f1_macro = sum(lm.f1 for lm in per_label) / N_LABELS

    return MetricsReport(
        precision=precision,
        f1_micro=f1_micro,
        f1_macro=f1_macro,
        per_label=tuple(per_label),
        n_samples=len(gold_sets),
    )


def majority_singleton(golds) -> tuple[str, ...]:
    """Most frequent single code as a constant prediction (the baseline)."""
    counts = {c: 0 for c in CODES}
    for g in golds:
        for c in g:
            counts[c] += 1
    best = max(CODES, key=lambda c: (counts[c], -CODES.index(c)))
    return (best,)
