"""Confusion matrices, per-class metrics and cross-validated evaluation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dataset import FoldPlan, TimeSeriesDataset
from .errors import ConfigError

METRIC_NAMES = ("accuracy", "balanced_accuracy", "sensitivity", "specificity", "precision", "f1", "weighted_f1")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray
    class_labels: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_normalized(self) -> np.ndarray:
        """Row percentages (each non-empty row sums to 100)."""
        rows = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, 100.0 * self.counts / rows, 0.0)

    def render(self, percent: bool = True) -> str:
        M = self.row_normalized() if percent else self.counts
        width = max(8, *(len(c) for c in self.class_labels))
        lines = [" " * width + "".join(c.rjust(width) for c in self.class_labels)]
        for name, row in zip(self.class_labels, M):
            cells = "".join((f"{v:.1f}%" if percent else str(int(v))).rjust(width) for v in row)
            lines.append(name.ljust(width) + cells)
        return "\n".join(lines)


def confusion(y_true, y_pred, n_classes: int, class_labels=None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise ConfigError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    for arr in (y_true, y_pred):
        if arr.size and (arr.min() < 1 or arr.max() > n_classes):
            raise ConfigError(f"labels must lie in 1..{n_classes}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true - 1, y_pred - 1), 1)
    labels = tuple(class_labels) if class_labels is not None else tuple(str(v) for v in range(1, n_classes + 1))
    return ConfusionMatrix(counts, labels)


def _ratio(num, den):
    den = np.asarray(den, dtype=float)
    undefined = den == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(undefined, 0.0, np.asarray(num, dtype=float) / np.where(undefined, 1.0, den))
    return val, undefined


@dataclass(frozen=True)
class MetricReport:
    """Per-class and aggregate classification metrics.

    Ratios with a zero denominator are reported as 0 and flagged in the
    matching ``*_undefined`` array.  ``accuracy`` is trace/total;
    ``balanced_accuracy`` is the macro mean of sensitivity.
    """

    class_labels: tuple[str, ...]
    support: np.ndarray
    sensitivity: np.ndarray
    specificity: np.ndarray
    precision: np.ndarray
    f1: np.ndarray
    sensitivity_undefined: np.ndarray
    specificity_undefined: np.ndarray
    precision_undefined: np.ndarray
    f1_undefined: np.ndarray
    accuracy: float

    def _avg(self, values, weighted):
        if weighted:
            total = self.support.sum()
            return float(values @ self.support / total) if total else 0.0
        return float(np.mean(values))

    def macro(self) -> dict:
        return {k: self._avg(getattr(self, k), False) for k in ("sensitivity", "specificity", "precision", "f1")}

    def weighted(self) -> dict:
        return {k: self._avg(getattr(self, k), True) for k in ("sensitivity", "specificity", "precision", "f1")}

    @property
    def balanced_accuracy(self) -> float:
        return self._avg(self.sensitivity, False)

    def summary(self) -> dict:
        """Flat metric dict used for cross-validation aggregation."""
        mac = self.macro()
        return {
            "accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "sensitivity": mac["sensitivity"],
            "specificity": mac["specificity"],
            "precision": mac["precision"],
            "f1": mac["f1"],
            "weighted_f1": self.weighted()["f1"],
        }

    def to_dict(self) -> dict:
        per_class = {}
        for i, c in enumerate(self.class_labels):
            per_class[c] = {
                "support": int(self.support[i]),
                "sensitivity": float(self.sensitivity[i]),
                "specificity": float(self.specificity[i]),
                "precision": float(self.precision[i]),
                "f1": float(self.f1[i]),
                "undefined": [k for k in ("sensitivity", "specificity", "precision", "f1")
                              if getattr(self, f"{k}_undefined")[i]],
            }
        return {
            "average_accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "per_class": per_class,
            "macro_avg": self.macro(),
            "weighted_avg": self.weighted(),
        }

    def render(self) -> str:
        lines = [f"{'':14s}{'Precision':>11s}{'Sensitivity':>13s}{'Specificity':>13s}{'F1-Score':>10s}{'Support':>9s}"]
        for i, c in enumerate(self.class_labels):
            lines.append(f"{c:14s}{self.precision[i]:11.4f}{self.sensitivity[i]:13.4f}"
                         f"{self.specificity[i]:13.4f}{self.f1[i]:10.4f}{int(self.support[i]):9d}")
        for name, avg in (("macro avg", self.macro()), ("weighted avg", self.weighted())):
            lines.append(f"{name:14s}{avg['precision']:11.4f}{avg['sensitivity']:13.4f}"
                         f"{avg['specificity']:13.4f}{avg['f1']:10.4f}{int(self.support.sum()):9d}")
        lines.append(f"Average Accuracy (trace/total): {self.accuracy:.4f}")
        lines.append(f"Balanced accuracy (macro sensitivity): {self.balanced_accuracy:.4f}")
        return "\n".join(lines)


def f1_score(precision, sensitivity):
    """Harmonic mean; 0 where both are 0."""
    p = np.asarray(precision, dtype=float)
    r = np.asarray(sensitivity, dtype=float)
    val, _ = _ratio(2 * p * r, p + r)
    return val


def per_class_metrics(cm: ConfusionMatrix) -> MetricReport:
    M = cm.counts.astype(float)
    total = M.sum()
    if total <= 0:
        raise ConfigError("empty confusion matrix")
    tp = np.diag(M)
    fn = M.sum(axis=1) - tp
    fp = M.sum(axis=0) - tp
    tn = total - tp - fn - fp
    sens, sens_u = _ratio(tp, tp + fn)
    spec, spec_u = _ratio(tn, tn + fp)
    prec, prec_u = _ratio(tp, tp + fp)
    f1, f1_u = _ratio(2 * prec * sens, prec + sens)
    return MetricReport(cm.class_labels, M.sum(axis=1).astype(int), sens, spec, prec, f1,
                        sens_u, spec_u, prec_u, f1_u | prec_u | sens_u, float(tp.sum() / total))


def evaluate(y_true, y_pred, n_classes: int, class_labels=None) -> tuple[ConfusionMatrix, MetricReport]:
    cm = confusion(y_true, y_pred, n_classes, class_labels)
    return cm, per_class_metrics(cm)


@dataclass(frozen=True)
class CVResult:
    mean: dict
    std: dict
    per_fold: tuple[dict, ...]
    excluded_folds: tuple[int, ...]
    fold_sizes: tuple[int, ...]


# fit(train_ds) -> predict(test_ds) -> labels for the trailing rows of test_ds
Trainer = Callable[[TimeSeriesDataset], Callable[[TimeSeriesDataset], np.ndarray]]


def cross_validate(fit: Trainer, ds: TimeSeriesDataset, folds: FoldPlan) -> CVResult:
    """Fit on ``k-1`` folds, score on the held-out fold, aggregate mean/std.

    ``fit`` receives the training subset and returns a predictor.  A
    predictor may return fewer labels than test rows (lagged models lose
    their first rows); predictions are matched to the trailing rows.
    Folds whose training part misses a class are skipped with a warning.
    """
    if folds.n_samples != ds.sample_count:
        raise ConfigError("fold plan does not match the dataset size")
    per_fold, excluded, sizes = [], [], []
    for f, (tr, te) in enumerate(folds.splits()):
        train = ds.subset(tr)
        if np.any(train.class_counts() == 0):
            warnings.warn(f"fold {f}: training part lacks a class; excluded", stacklevel=2)
            excluded.append(f)
            continue
        test = ds.subset(te)
        pred = np.asarray(fit(train)(test), dtype=int)
        truth = test.labels[len(test.labels) - len(pred):]
        _, report = evaluate(truth, pred, ds.class_count, ds.class_names)
        per_fold.append(report.summary())
        sizes.append(len(te))
    if not per_fold:
        raise ConfigError("every fold was excluded")
    mean = {k: float(np.mean([d[k] for d in per_fold])) for k in METRIC_NAMES}
    std = {k: float(np.std([d[k] for d in per_fold])) for k in METRIC_NAMES}
    return CVResult(mean, std, tuple(per_fold), tuple(excluded), tuple(sizes))
