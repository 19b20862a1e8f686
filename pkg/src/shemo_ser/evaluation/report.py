"""Report artifacts for one evaluated run.

``emit_report`` writes into ``out_dir``:

- ``metrics.json``   every EvaluationReport field (machine-readable)
- ``metrics.txt``    per-class and aggregate table (human-readable)
- ``confusion.csv``  5x5 counts, rows = true label, columns = predicted
- ``confusion.png``  the same matrix as a heatmap
- ``curves.csv``     per-epoch loss / accuracy / learning rate
- ``curves.png``     training and validation loss and accuracy

The two curve files are skipped, and stale copies removed, when the
history is empty (e.g. the SVM). Every file is replaced atomically.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from pathlib import Path

from shemo_ser._io import atomic_write, atomic_write_text
from shemo_ser.evaluation import plotting
from shemo_ser.evaluation.metrics import EvaluationReport
from shemo_ser.training import TrainingHistory

logger = logging.getLogger(__name__)

METRICS_JSON = "metrics.json"
METRICS_TXT = "metrics.txt"
CONFUSION_CSV = "confusion.csv"
CONFUSION_PNG = "confusion.png"
CURVES_CSV = "curves.csv"
CURVES_PNG = "curves.png"
CURVE_FIELDS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr")


def metrics_json(report: EvaluationReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def metrics_text(report: EvaluationReport) -> str:
    lines = [
        f"split: {report.split}    samples: {report.n_samples}",
        "",
        f"{'class':<12}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>10}",
    ]
    for name, p, r, f, s in zip(report.labels, report.precision, report.recall, report.f1, report.support):
        lines.append(f"{name:<12}{p:>10.4f}{r:>10.4f}{f:>10.4f}{s:>10d}")
    lines += [
        "",
        f"{'accuracy':<20}{report.accuracy:.4f}",
        f"{'weighted f1':<20}{report.weighted_f1:.4f}",
        f"{'weighted recall':<20}{report.weighted_recall:.4f}",
        f"{'weighted precision':<20}{report.weighted_precision:.4f}",
        f"{'macro f1':<20}{report.macro_f1:.4f}",
        f"{'macro recall':<20}{report.macro_recall:.4f}",
        f"{'macro precision':<20}{report.macro_precision:.4f}",
    ]
    return "\n".join(lines) + "\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def confusion_csv(report: EvaluationReport) -> str:
    rows = [["true\\predicted", *report.labels]]
    rows += [[name, *counts] for name, counts in zip(report.labels, report.confusion)]
    return _csv(rows)


def curves_csv(history: TrainingHistory) -> str:
    rows = [list(CURVE_FIELDS)]
    rows += [[getattr(r, f) for f in CURVE_FIELDS] for r in history.records]
    return _csv(rows)


def emit_report(
    report: EvaluationReport,
    history: TrainingHistory | None,
    out_dir: str | os.PathLike,
    title: str = "",
) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise PermissionError(f"report directory {out} is not writable")

    written = []
    for name, text in (
        (METRICS_JSON, metrics_json(report)),
        (METRICS_TXT, metrics_text(report)),
        (CONFUSION_CSV, confusion_csv(report)),
    ):
        atomic_write_text(out / name, text)
        written.append(out / name)
    fig = plotting.confusion_figure(report.confusion, report.labels, title or f"{report.split} confusion")
    atomic_write(out / CONFUSION_PNG, plotting.render(fig))
    written.append(out / CONFUSION_PNG)

    if history is None or not history.records:
        logger.info("no training history: skipping %s and %s", CURVES_CSV, CURVES_PNG)
        for name in (CURVES_CSV, CURVES_PNG):
            (out / name).unlink(missing_ok=True)
        return written
    atomic_write_text(out / CURVES_CSV, curves_csv(history))
    r = history.records
    fig = plotting.curves_figure(
        [x.epoch for x in r],
        [x.train_loss for x in r],
        [x.val_loss for x in r],
        [x.train_acc for x in r],
        [x.val_acc for x in r],
        title,
    )
    atomic_write(out / CURVES_PNG, plotting.render(fig))
    written += [out / CURVES_CSV, out / CURVES_PNG]
    return written
