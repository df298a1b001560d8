"""Confusion matrices, per-class precision/recall/F1, and report rendering.

Class order is fixed to :data:`liarnet.data.LABELS`. Metric conventions: the
zero-division convention maps an undefined metric to 0; the Avg/Total row is
support-weighted (row sums as weights); plain macro averages are also emitted
but labeled as such.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import LABELS, NUM_CLASSES

REPORT_SCHEMA_VERSION = 1


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    per_class: dict  # label -> ClassMetrics
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    total: int


def confusion(actual, predicted):
    """Count (actual, predicted) pairs into a 6x6 matrix (rows = actual)."""
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.shape != predicted.shape or actual.ndim != 1:
        raise ValueError(f"label sequences must be equal-length 1-D, "
                         f"got {actual.shape} and {predicted.shape}")
    if actual.size == 0:
        raise ValueError("cannot build a confusion matrix from no pairs")
    for name, arr in (("actual", actual), ("predicted", predicted)):
        if arr.min() < 0 or arr.max() >= NUM_CLASSES:
            raise ValueError(f"{name} labels out of range [0, {NUM_CLASSES})")
    matrix = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(matrix, (actual, predicted), 1)
    return matrix


def _safe_div(num, den):
    return float(num) / float(den) if den else 0.0


def metrics(matrix):
    """Per-class precision/recall/F1 with supports, weighted and macro
    averages, and accuracy, from a confusion matrix."""
    matrix = np.asarray(matrix, dtype=np.int64)
    if matrix.shape != (NUM_CLASSES, NUM_CLASSES):
        raise ValueError(f"expected a {NUM_CLASSES}x{NUM_CLASSES} matrix, got {matrix.shape}")
    total = int(matrix.sum())
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    row_sums = matrix.sum(axis=1)
    col_sums = matrix.sum(axis=0)
    per_class = {}
    for c, label in enumerate(LABELS):
        precision = _safe_div(matrix[c, c], col_sums[c])
        recall = _safe_div(matrix[c, c], row_sums[c])
        f1 = _safe_div(2 * precision * recall, precision + recall)
        per_class[label] = ClassMetrics(precision, recall, f1, int(row_sums[c]))

    weights = row_sums / total
    values = list(per_class.values())
    return MetricsReport(
        per_class=per_class,
        weighted_precision=float(sum(w * m.precision for w, m in zip(weights, values))),
        weighted_recall=float(sum(w * m.recall for w, m in zip(weights, values))),
        weighted_f1=float(sum(w * m.f1 for w, m in zip(weights, values))),
        macro_precision=float(np.mean([m.precision for m in values])),
        macro_recall=float(np.mean([m.recall for m in values])),
        macro_f1=float(np.mean([m.f1 for m in values])),
        accuracy=_safe_div(np.trace(matrix), total),
        total=total,
    )


def render_text(report, matrix=None):
    """Plain-text table: one row per class, a support-weighted Avg/Total row,
    macro and accuracy footers, optionally followed by the confusion grid."""
    width = max(len(label) for label in LABELS + ("Avg/Total",)) + 2
    lines = [f"{'':>{width}}  precision  recall  f1-score  support"]
    for label in LABELS:
        m = report.per_class[label]
        lines.append(f"{label:>{width}}  {m.precision:9.2f}  {m.recall:6.2f}  "
                     f"{m.f1:8.2f}  {m.support:7d}")
    lines.append("")
    lines.append(f"{'Avg/Total':>{width}}  {report.weighted_precision:9.2f}  "
                 f"{report.weighted_recall:6.2f}  {report.weighted_f1:8.2f}  "
                 f"{report.total:7d}")
    lines.append(f"{'macro avg':>{width}}  {report.macro_precision:9.2f}  "
                 f"{report.macro_recall:6.2f}  {report.macro_f1:8.2f}  "
                 f"{report.total:7d}")
    lines.append("")
    lines.append(f"accuracy: {report.accuracy:.4f} ({int(round(report.accuracy * report.total))}/{report.total})")
    if matrix is not None:
        lines.append("")
        lines.append(format_confusion(matrix))
    return "\n".join(lines) + "\n"


def format_confusion(matrix):
    """Confusion matrix as a labeled text grid (rows actual, columns predicted)."""
    matrix = np.asarray(matrix)
    width = max(len(label) for label in LABELS) + 2
    cell = max(6, len(str(int(matrix.max()))) + 2)
    corner = "actual \\ predicted"
    header = f"{corner:>{width + 4}}" + "".join(
        f"{label[:cell - 1]:>{cell}}" for label in LABELS)
    lines = [header]
    for c, label in enumerate(LABELS):
        lines.append(f"{label:>{width + 4}}" + "".join(
            f"{int(v):>{cell}}" for v in matrix[c]))
    return "\n".join(lines) + "\n"


def render_json(report, matrix=None):
    """Stable machine-readable report with a schema-version field."""
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "classes": list(LABELS),
        "per_class": {
            label: {"precision": m.precision, "recall": m.recall,
                    "f1": m.f1, "support": m.support}
            for label, m in report.per_class.items()
        },
        "weighted": {"precision": report.weighted_precision,
                     "recall": report.weighted_recall,
                     "f1": report.weighted_f1},
        "macro": {"precision": report.macro_precision,
                  "recall": report.macro_recall,
                  "f1": report.macro_f1},
        "accuracy": report.accuracy,
        "total": report.total,
    }
    if matrix is not None:
        payload["confusion"] = [[int(v) for v in row] for row in np.asarray(matrix)]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def render_report(report, matrix=None, fmt="text"):
    """Render a report in ``text`` or ``json`` form."""
    if fmt == "text":
        return render_text(report, matrix)
    if fmt == "json":
        return render_json(report, matrix)
    raise ValueError(f"unknown report format {fmt!r}; expected 'text' or 'json'")
