"""Stratified k-fold splitting, confusion matrices, and derived metrics.

Confusion matrices are oriented rows = predicted class, columns = true
class. Binary collapse supports two cell mappings:

  'row-fn' (default)   FN = the positive row's off-diagonal cells
                       (predicted positive, true other) and FP = the positive
                       column's off-diagonal cells, i.e. the literal reading
                       of the published 3-class collapse table;
  'conventional'       the textbook assignment (FN = missed positives in the
                       positive column, FP = false alarms in the positive row).

Both mappings partition the same total. Metrics with a zero denominator are
reported as None, never NaN.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

COLLAPSE_MODES = ("row-fn", "conventional")


@dataclass
class FoldPlan:
    k: int
    folds: list[np.ndarray]
    seed: int


@dataclass
class ConfusionMatrix:
    class_names: list[str]
    counts: np.ndarray  # (M, M) ints, rows predicted, columns true

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class BinaryCounts:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


def kfold_split(n: int, labels, k: int = 5, seed: int = 0) -> FoldPlan:
    """Stratified disjoint folds covering 0..n-1; per-class sizes differ <= 1."""
    labels = np.asarray(labels)
    if len(labels) != n:
        raise DataError("labels length != n")
    classes, counts = np.unique(labels, return_counts=True)
    if k > counts.min():
        raise DataError(f"k={k} exceeds the smallest class count {counts.min()}")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for c in classes:
        members = np.flatnonzero(labels == c)
        rng.shuffle(members)
        for i, idx in enumerate(members):
            folds[i % k].append(int(idx))
    return FoldPlan(k=k, folds=[np.array(sorted(f), dtype=np.int64) for f in folds],
                    seed=seed)


def train_test_split(n: int, labels, test_fraction: float = 0.1, seed: int = 0):
    """Stratified single split; returns (train_idx, test_idx)."""
    labels = np.asarray(labels)
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    test = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        rng.shuffle(members)
        take = max(1, int(round(test_fraction * len(members))))
        test.extend(members[:take].tolist())
    test = np.array(sorted(test), dtype=np.int64)
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    return np.flatnonzero(mask), test


def confusion(pred, truth, classes) -> ConfusionMatrix:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if len(pred) != len(truth):
        raise DataError("prediction and truth lengths differ")
    names = list(classes)
    counts = np.zeros((len(names), len(names)), dtype=np.int64)
    for p, t in zip(pred.tolist(), truth.tolist()):
        if not (0 <= p < len(names) and 0 <= t < len(names)):
            raise DataError(f"unknown class id {p if not 0 <= p < len(names) else t}")
        counts[p, t] += 1
    return ConfusionMatrix(class_names=names, counts=counts)


def binary_collapse(matrix: ConfusionMatrix, positive: int,
                    mapping: str = "row-fn") -> BinaryCounts:
    """Collapse an MxM matrix to TP/FN/FP/TN around one positive class."""
    if mapping not in COLLAPSE_MODES:
        raise DataError(f"unknown collapse mapping {mapping!r}")
    m = matrix.counts
    if not 0 <= positive < len(matrix.class_names):
        raise DataError(f"positive class {positive} out of range")
    tp = int(m[positive, positive])
    row_rest = int(m[positive, :].sum()) - tp  # predicted positive, true other
    col_rest = int(m[:, positive].sum()) - tp  # predicted other, true positive
    tn = matrix.total - tp - row_rest - col_rest
    if mapping == "row-fn":
        return BinaryCounts(tp=tp, fn=row_rest, fp=col_rest, tn=tn)
    return BinaryCounts(tp=tp, fn=col_rest, fp=row_rest, tn=tn)


def metrics(counts: BinaryCounts) -> dict:
    """accuracy, sensitivity, specificity, fpr, precision; None if undefined."""
    if counts.total <= 0:
        raise DataError("empty counts")

    def ratio(num, den):
        return num / den if den > 0 else None

    return {
        "accuracy": (counts.tp + counts.tn) / counts.total,
        "sensitivity": ratio(counts.tp, counts.tp + counts.fn),
        "specificity": ratio(counts.tn, counts.tn + counts.fp),
        "fpr": ratio(counts.fp, counts.fp + counts.tn),
        "precision": ratio(counts.tp, counts.tp + counts.fp),
    }


def multiclass_accuracy(matrix: ConfusionMatrix) -> float:
    if matrix.total <= 0:
        raise DataError("empty matrix")
    return float(np.trace(matrix.counts)) / matrix.total


def render_metrics_text(per_class: dict[str, dict], overall_accuracy: float) -> str:
    header = ["Class", "Accuracy", "Sensitivity", "Specificity", "FPR", "Precision"]
    rows = [header]
    for name, vals in per_class.items():
        rows.append([name] + [_fmt(vals[k.lower()]) for k in header[1:]])
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.append(f"Overall accuracy: {overall_accuracy:.6f}")
    return "\n".join(lines) + "\n"


def render_metrics_kv(per_class: dict[str, dict], overall_accuracy: float) -> str:
    lines = [f"metrics.overall_accuracy = {overall_accuracy!r}"]
    for name, vals in per_class.items():
        for key, v in vals.items():
            lines.append(f"metrics.{name}.{key} = {'undefined' if v is None else repr(v)}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return "undefined" if v is None else f"{v:.6f}"
