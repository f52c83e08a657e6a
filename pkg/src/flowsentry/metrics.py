"""Binary detection metrics and per-class detection rates.

Attack is the positive class (label 1) throughout. Metrics with a zero
denominator are reported as 0.0 and flagged via ``undefined_metrics`` so
batch reports never abort on degenerate predictors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0

    @property
    def fpr(self) -> float:
        denom = self.fp + self.tn
        return self.fp / denom if denom else 0.0

    def undefined_metrics(self) -> set[str]:
        """Names of metrics whose denominator was zero (reported as 0.0)."""
        out = set()
        if self.tp + self.fp == 0:
            out.add("precision")
        if self.tp + self.fn == 0:
            out.add("recall")
        if self.precision + self.recall == 0:
            out.add("f1")
        if self.fp + self.tn == 0:
            out.add("fpr")
        return out


def confusion(preds: np.ndarray, truth: np.ndarray) -> ConfusionMatrix:
    """Build a confusion matrix from 0/1 prediction and truth vectors."""
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    if preds.shape != truth.shape:
        raise ValueError(f"length mismatch: preds {preds.shape} vs truth {truth.shape}")
    p = preds.astype(bool)
    t = truth.astype(bool)
    return ConfusionMatrix(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        fn=int(np.sum(~p & t)),
        tn=int(np.sum(~p & ~t)),
    )


def precision(cm: ConfusionMatrix) -> float:
    return cm.precision


def recall(cm: ConfusionMatrix) -> float:
    return cm.recall


def f1(cm: ConfusionMatrix) -> float:
    return cm.f1


def accuracy(cm: ConfusionMatrix) -> float:
    return cm.accuracy


def fpr(cm: ConfusionMatrix) -> float:
    return cm.fpr


def f1_score(preds: np.ndarray, truth: np.ndarray) -> float:
    return confusion(preds, truth).f1


def _tie_averaged_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # ranks i+1..j+1 averaged
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores: np.ndarray, truth: np.ndarray) -> float:
    """Area under the ROC curve by the rank statistic.

    Equals the probability that a uniformly chosen attack outscores a
    uniformly chosen benign instance, ties counted 1/2 (equivalent to
    trapezoidal integration of the ROC curve).
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(bool)
    if scores.shape != truth.shape:
        raise ValueError("length mismatch between scores and truth")
    n_pos = int(truth.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc requires both classes present")
    ranks = _tie_averaged_ranks(scores)
    rank_sum_pos = float(ranks[truth].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class ClassRateTable:
    """Detection rate per original multi-class label.

    rate = fraction of that class's rows whose binary prediction matches the
    binary truth, so benign classes measure the true-negative rate and attack
    classes the true-positive rate.
    """

    rates: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def to_rows(self) -> list[tuple[str, int, float]]:
        return [(c, self.counts[c], self.rates[c]) for c in sorted(self.rates)]

    def to_csv(self) -> str:
        lines = ["class,count,detection_rate"]
        for name, count, rate in self.to_rows():
            lines.append(f"{name},{count},{rate:.6f}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        width = max((len(c) for c in self.rates), default=5)
        lines = [f"{'class':<{width}}  {'count':>8}  rate"]
        for name, count, rate in self.to_rows():
            lines.append(f"{name:<{width}}  {count:>8}  {rate:7.2%}")
        return "\n".join(lines)


def class_rates(
    binary_preds: np.ndarray,
    truth_binary: np.ndarray,
    truth_multiclass: np.ndarray,
) -> ClassRateTable:
    """Per-class correctness of the binary prediction, keyed by original label."""
    binary_preds = np.asarray(binary_preds)
    truth_binary = np.asarray(truth_binary)
    truth_multiclass = np.asarray(truth_multiclass)
    if not (len(binary_preds) == len(truth_binary) == len(truth_multiclass)):
        raise ValueError("class_rates inputs must be aligned")
    table = ClassRateTable()
    correct = binary_preds == truth_binary
    for name in np.unique(truth_multiclass):
        mask = truth_multiclass == name
        count = int(mask.sum())
        if count == 0:
            logger.warning("class %r has no rows; omitted from rate table", name)
            continue
        table.rates[str(name)] = float(correct[mask].mean())
        table.counts[str(name)] = count
    return table


def metrics_row(preds: np.ndarray, truth: np.ndarray, scores: np.ndarray | None = None) -> dict:
    """One report row: accuracy/precision/recall/F1/FPR plus optional ROC-AUC."""
    cm = confusion(preds, truth)
    row = {
        "accuracy": cm.accuracy,
        "precision": cm.precision,
        "recall": cm.recall,
        "f1": cm.f1,
        "fpr": cm.fpr,
        "tp": cm.tp,
        "fp": cm.fp,
        "fn": cm.fn,
        "tn": cm.tn,
        "undefined": ",".join(sorted(cm.undefined_metrics())),
    }
    if scores is not None:
        row["roc_auc"] = roc_auc(scores, truth)
    return row
