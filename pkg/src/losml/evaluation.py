"""Confusion matrices, classification metrics and stratified splitting."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "kappa", "mcc")
TABLE_COLUMNS = ("Model", "Accuracy", "Precision", "Recall", "F1", "Kappa", "MCC")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """``counts[a, p]`` = number of samples of actual class ``a`` predicted as ``p``."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise EvaluationError("confusion matrix must be square")
        if (c < 0).any():
            raise EvaluationError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_matrix(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape:
        raise EvaluationError(f"length mismatch: {len(t)} true vs {len(p)} predicted labels")
    for name, v in (("true", t), ("predicted", p)):
        if len(v) and (v.min() < 0 or v.max() >= n_classes):
            raise EvaluationError(f"{name} label outside [0, {n_classes - 1}]")
    counts = np.bincount(t * n_classes + p, minlength=n_classes * n_classes)
    return ConfusionMatrix(counts.reshape(n_classes, n_classes))


def _require_total(cm: ConfusionMatrix) -> None:
    if cm.total <= 0:
        raise EvaluationError("empty confusion matrix")


@dataclass
class MetricsReport:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro: dict[str, float]
    weighted: dict[str, float]
    cohen_kappa: float
    mcc: float
    degenerate: list[str] = field(default_factory=list)
    average: str = "weighted"

    def headline(self) -> dict[str, float]:
        agg = self.weighted if self.average == "weighted" else self.macro
        return {
            "accuracy": self.accuracy,
            "precision": agg["precision"],
            "recall": agg["recall"],
            "f1": agg["f1"],
            "kappa": self.cohen_kappa,
            "mcc": self.mcc,
        }

    def metric(self, name: str) -> float:
        """Look up one of the six headline metrics; ``macro_f1`` style names pick an average."""
        if name in self.headline():
            return self.headline()[name]
        for prefix, agg in (("macro_", self.macro), ("weighted_", self.weighted)):
            if name.startswith(prefix) and name[len(prefix):] in agg:
                return agg[name[len(prefix):]]
        raise EvaluationError(f"unknown metric {name!r}")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "support": self.support.tolist(),
            "macro": self.macro,
            "weighted": self.weighted,
            "cohen_kappa": self.cohen_kappa,
            "mcc": self.mcc,
            "average": self.average,
            "degenerate": list(self.degenerate),
        }


def _safe_div(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    zero = den == 0
    return np.divide(num, den, out=np.zeros_like(num), where=~zero), zero


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def cohen_kappa(cm: ConfusionMatrix) -> tuple[float, bool]:
    """Return ``(kappa, degenerate)``; chance agreement of 1 gives ``(0.0, True)``."""
    _require_total(cm)
    c = cm.counts.astype(float)
    n = c.sum()
    p0 = np.trace(c) / n
    pe = float((c.sum(axis=1) * c.sum(axis=0)).sum()) / (n * n)
    if pe >= 1.0:
        return 0.0, True
    return float(np.clip((p0 - pe) / (1.0 - pe), -1.0, 1.0)), False


def mcc(cm: ConfusionMatrix) -> tuple[float, bool]:
    """Multiclass Matthews correlation; equals the TP/TN/FP/FN form at K = 2."""
    _require_total(cm)
    c = cm.counts.astype(float)
    s = c.sum()
    correct = np.trace(c)
    t = c.sum(axis=1)  # actual
    p = c.sum(axis=0)  # predicted
    cov_tp = correct * s - float(t @ p)
    cov_pp = s * s - float(p @ p)
    cov_tt = s * s - float(t @ t)
    if cov_pp == 0 or cov_tt == 0:
        return 0.0, True
    return float(np.clip(cov_tp / math.sqrt(cov_pp * cov_tt), -1.0, 1.0)), False


def metrics_report(cm: ConfusionMatrix, average: str = "weighted") -> MetricsReport:
    _require_total(cm)
    if average not in ("weighted", "macro"):
        raise EvaluationError(f"unknown average {average!r}")
    c = cm.counts.astype(float)
    tp = np.diag(c)
    pred = c.sum(axis=0)
    actual = c.sum(axis=1)
    precision, p_zero = _safe_div(tp, pred)
    recall, r_zero = _safe_div(tp, actual)
    f1, f_zero = _safe_div(2.0 * precision * recall, precision + recall)
    degenerate = []
    for k in range(cm.n_classes):
        if p_zero[k]:
            degenerate.append(f"precision[{k}]")
        if r_zero[k]:
            degenerate.append(f"recall[{k}]")
        if f_zero[k]:
            degenerate.append(f"f1[{k}]")
    support = actual.astype(np.int64)
    n = c.sum()
    macro = {
        "precision": float(precision.mean()),
        "recall": float(recall.mean()),
        "f1": float(f1.mean()),
    }
    weighted = {
        "precision": float(precision @ actual / n),
        "recall": float(recall @ actual / n),
        "f1": float(f1 @ actual / n),
    }
    kappa, k_deg = cohen_kappa(cm)
    m, m_deg = mcc(cm)
    if k_deg:
        degenerate.append("kappa")
    if m_deg:
        degenerate.append("mcc")
    return MetricsReport(
        accuracy=float(np.trace(c) / n),
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        macro=macro,
        weighted=weighted,
        cohen_kappa=kappa,
        mcc=m,
        degenerate=degenerate,
        average=average,
    )


def evaluate(y_true, y_pred, n_classes: int, average: str = "weighted") -> tuple[ConfusionMatrix, MetricsReport]:
    cm = confusion_matrix(y_true, y_pred, n_classes)
    return cm, metrics_report(cm, average)


def stratified_split(y, test_fraction: float = 0.2, seed: int = 42) -> tuple[np.ndarray, np.ndarray]:
    """Per class, ``round(count * test_fraction)`` rows (half rounds up) go to test."""
    y = np.asarray(getattr(y, "labels", y), dtype=np.int64)
    if not 0.0 < test_fraction < 1.0:
        raise EvaluationError("test_fraction must be strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < 2:
            raise EvaluationError(f"class {int(c)} has a single sample; cannot stratify")
        n_test = int(math.floor(len(idx) * test_fraction + 0.5))
        perm = rng.permutation(idx)
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def write_metrics_table(rows: Sequence[tuple[str, MetricsReport]], path: str | Path) -> Path:
    """One row per model in the Accuracy/Precision/Recall/F1/Kappa/MCC layout."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for name, rep in rows:
            h = rep.headline()
            w.writerow([name] + [repr(h[m]) for m in METRIC_NAMES])
    return path


def write_metrics_json(report: MetricsReport, cm: ConfusionMatrix, path: str | Path, **extra) -> Path:
    path = Path(path)
    doc = {"metrics": report.to_dict(), "confusion_matrix": cm.counts.tolist(), **extra}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path
