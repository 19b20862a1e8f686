"""Confusion matrices and the accuracy / F1 / recall family of metrics."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from shemo_ser.corpus.labels import N_CLASSES, TARGET_TAGS, EmotionLabel


class UndefinedPrecisionWarning(UserWarning):
    """A class was never predicted, so its precision is undefined (reported as 0)."""


def confusion(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    """``M[i, j]`` counts samples with true class ``i`` predicted as ``j``."""
    t = np.asarray(y_true, dtype=np.int64).ravel()
    p = np.asarray(y_pred, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.size} true labels vs {p.size} predictions")
    for name, arr in (("true", t), ("predicted", p)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"{name} label codes must lie in [0, {n_classes - 1}]")
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (t, p), 1)
    return m


def per_class(m: np.ndarray) -> dict[str, np.ndarray]:
    m = np.asarray(m, dtype=np.int64)
    tp = np.diag(m).astype(np.float64)
    support = m.sum(axis=1)
    predicted = m.sum(axis=0)
    empty_cols = (predicted == 0) & (support > 0)
    if empty_cols.any():
        warnings.warn(
            f"precision undefined for never-predicted classes {np.flatnonzero(empty_cols).tolist()}; counted as 0",
            UndefinedPrecisionWarning,
            stacklevel=3,
        )
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return {"precision": precision, "recall": recall, "f1": f1, "support": support}


def weighted_metrics(m: np.ndarray, pc: dict[str, np.ndarray] | None = None) -> dict[str, float]:
    """Accuracy plus support-weighted and macro F1/recall/precision.

    Macro averages run over the classes present in the true labels.
    Weighted recall is computed as trace / total, which is the
    support-weighted mean of per-class recall written without the
    cancelling divisions, so it equals accuracy exactly.
    """
    m = np.asarray(m, dtype=np.int64)
    total = int(m.sum())
    if total == 0:
        raise ValueError("metrics are undefined for an empty confusion matrix")
    if pc is None:
        pc = per_class(m)
    support = pc["support"]
    present = support > 0
    w = support / total
    accuracy = float(np.trace(m)) / total
    return {
        "accuracy": accuracy,
        "weighted_recall": float(np.trace(m)) / total,
        "weighted_precision": float(np.sum(w * pc["precision"])),
        "weighted_f1": float(np.sum(w * pc["f1"])),
        "macro_recall": float(pc["recall"][present].mean()),
        "macro_precision": float(pc["precision"][present].mean()),
        "macro_f1": float(pc["f1"][present].mean()),
    }


@dataclass
class EvaluationReport:
    accuracy: float
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    weighted_f1: float
    weighted_recall: float
    weighted_precision: float
    macro_f1: float
    macro_recall: float
    macro_precision: float
    confusion: list[list[int]]
    n_samples: int
    split: str
    labels: list[str]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(**d)


def report_from_confusion(m: np.ndarray, split: str = "test") -> EvaluationReport:
    pc = per_class(m)
    agg = weighted_metrics(m, pc)
    return EvaluationReport(
        accuracy=agg["accuracy"],
        precision=pc["precision"].tolist(),
        recall=pc["recall"].tolist(),
        f1=pc["f1"].tolist(),
        support=[int(s) for s in pc["support"]],
        weighted_f1=agg["weighted_f1"],
        weighted_recall=agg["weighted_recall"],
        weighted_precision=agg["weighted_precision"],
        macro_f1=agg["macro_f1"],
        macro_recall=agg["macro_recall"],
        macro_precision=agg["macro_precision"],
        confusion=np.asarray(m).tolist(),
        n_samples=int(np.asarray(m).sum()),
        split=split,
        labels=list(TARGET_TAGS),
    )


def label_codes(labels) -> np.ndarray:
    out = []
    for lab in labels:
        if isinstance(lab, (int, np.integer)):
            out.append(int(EmotionLabel(int(lab))))
        else:
            out.append(int(EmotionLabel.from_tag(getattr(lab, "tag", lab))))
    return np.asarray(out, dtype=np.int64)


def evaluate(model, inputs, labels, split: str = "test") -> EvaluationReport:
    """One argmax prediction per clip, scored against ``labels``.

    Rows and columns of the confusion matrix follow the fixed label codes,
    whatever output order the model uses internally.
    """
    if len(labels) == 0:
        raise ValueError(f"cannot evaluate an empty {split} split")
    try:
        y_true = label_codes(labels)
    except ValueError as exc:
        raise ValueError(f"{exc}; the model's label map is {model.label_names}") from None
    proba = model.predict_proba(inputs)
    y_pred = model.codes_for_columns()[proba.argmax(axis=1)]
    return report_from_confusion(confusion(y_true, y_pred), split)
