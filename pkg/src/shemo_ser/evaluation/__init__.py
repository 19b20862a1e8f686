from shemo_ser.evaluation.metrics import (
    EvaluationReport,
    UndefinedPrecisionWarning,
    confusion,
    evaluate,
    per_class,
    report_from_confusion,
    weighted_metrics,
)
from shemo_ser.evaluation.report import emit_report

__all__ = [
    "EvaluationReport",
    "UndefinedPrecisionWarning",
    "confusion",
    "emit_report",
    "evaluate",
    "per_class",
    "report_from_confusion",
    "weighted_metrics",
]
