"""Evaluation report: overall accuracy, per-class accuracy, confusion."""

import csv
from dataclasses import dataclass

import numpy as np

from .core import EMOTION_NAMES, LengthMismatch, N_CLASSES


@dataclass(frozen=True)
class EvalReport:
    overall_accuracy: float
    per_class_accuracy: np.ndarray  # (7,)
    confusion: np.ndarray           # (7, 7) counts, rows indexed by truth


def evaluate(predictions, truths):
    """Confusion counts and accuracies of predictions against truths.

    Per-class accuracy is the diagonal over the row total (0 for classes
    with no truth samples); overall accuracy is trace over total.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape or predictions.ndim != 1:
        raise LengthMismatch("predictions and truths must be equal-length 1-D sequences")
    if predictions.size == 0:
        raise ValueError("cannot evaluate empty label lists")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (truths, predictions), 1)
    row_totals = confusion.sum(axis=1)
    diag = np.diag(confusion).astype(np.float64)
    per_class = np.where(row_totals > 0, diag / np.maximum(row_totals, 1), 0.0)
    overall = float(diag.sum() / predictions.size)
    return EvalReport(overall_accuracy=overall, per_class_accuracy=per_class,
                      confusion=confusion)


def write_report_csv(report, path):
    """Report as CSV: one overall row, then per-class accuracy plus the
    confusion row for each true class."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["overall_accuracy", f"{report.overall_accuracy!r}"])
        writer.writerow(["class", "per_class_accuracy", *EMOTION_NAMES])
        for e, name in enumerate(EMOTION_NAMES):
            writer.writerow([name, f"{report.per_class_accuracy[e]!r}",
                             *[int(v) for v in report.confusion[e]]])


def format_report(report):
    """Human-readable table of the report."""
    width = max(len(n) for n in EMOTION_NAMES)
    lines = [f"overall accuracy: {report.overall_accuracy:.4f}", ""]
    header = " ".join(f"{n[:4]:>5}" for n in EMOTION_NAMES)
    lines.append(f"{'true/pred':>{width + 2}} {header}   per-class")
    for e, name in enumerate(EMOTION_NAMES):
        counts = " ".join(f"{int(v):>5}" for v in report.confusion[e])
        lines.append(f"{name:>{width + 2}} {counts}   {report.per_class_accuracy[e]:.4f}")
    return "\n".join(lines)
