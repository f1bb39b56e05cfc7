"""Evaluation metrics: confusion counts, PRF, AUC, ROC, and ablation tables.

AUC uses the rank-statistic formulation with ties counting one half. The ROC
sweep visits every distinct score as a threshold (predict positive at or
above it), preceded by an all-negative sentinel point, so the point list
always runs from (0, 0) to (1, 1). TPR at a fixed FPR takes the best swept
point whose FPR stays at or under the target; nothing is interpolated, and
with no qualifying point beyond the sentinel the answer is 0.

Precision, recall, and F1 all report 0 whenever their denominator is 0.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .model import UrlClassifier, predict_probs
from .tokenizer import TokenSequence

DEFAULT_FPR_TARGETS = (0.01, 0.001)


class MetricsError(ValueError):
    pass


def confusion(preds, labels, num_classes: int) -> np.ndarray:
    """K x K counts; rows are true classes, columns predicted classes."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise MetricsError("preds and labels must be equal-length vectors")
    if preds.size and (preds.min() < 0 or preds.max() >= num_classes
                       or labels.min() < 0 or labels.max() >= num_classes):
        raise MetricsError("class values must lie in [0, K)")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    for t, p in zip(labels, preds):
        cm[t, p] += 1
    return cm


def prf(cm: np.ndarray, positive_class: int) -> tuple[float, float, float]:
    """Precision, recall, F1 of one class; zero denominators give 0."""
    tp = float(cm[positive_class, positive_class])
    fp = float(cm[:, positive_class].sum() - tp)
    fn = float(cm[positive_class, :].sum() - tp)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    return precision, recall, f1


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    i = 0
    n = values.shape[0]
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricsError("scores and labels must be equal-length vectors")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("AUC undefined: need both classes present")
    ranks = _midranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_and_tpr_at_fpr(scores, labels,
                       fpr_targets: tuple[float, ...] = DEFAULT_FPR_TARGETS
                       ) -> tuple[list[tuple[float, float]], dict[float, float]]:
    """ROC point list over distinct-score thresholds, plus TPR at targets."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("AUC undefined: need both classes present")
    points = [(0.0, 0.0)]
    for threshold in np.unique(scores)[::-1]:
        positive = scores >= threshold
        tp = int((positive & (labels == 1)).sum())
        fp = int((positive & (labels == 0)).sum())
        points.append((fp / n_neg, tp / n_pos))
    tprs = {}
    for target in fpr_targets:
        tprs[target] = max(tpr for fpr, tpr in points if fpr <= target)
    return points, tprs


@dataclass
class EvalReport:
    """One evaluation row: headline rates plus the supporting detail."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    roc: list[tuple[float, float]]
    tpr_at_fpr: dict[float, float]
    confusion: list[list[int]]
    per_class: list[dict] = field(default_factory=list)
    macro: dict = field(default_factory=dict)
    auc_micro: float | None = None
    positive_class: int = 1
    tag: str | None = None

    def to_json_dict(self) -> dict:
        out = {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "roc": [[fpr, tpr] for fpr, tpr in self.roc],
            "tpr_at_fpr": {str(t): v for t, v in self.tpr_at_fpr.items()},
            "confusion": self.confusion,
            "per_class": self.per_class,
            "macro": self.macro,
            "positive_class": self.positive_class,
        }
        if self.auc_micro is not None:
            out["auc_micro"] = self.auc_micro
        if self.tag is not None:
            out["tag"] = self.tag
        return out

    def to_text(self) -> str:
        rows = [("accuracy", self.accuracy), ("precision", self.precision),
                ("recall", self.recall), ("f1", self.f1), ("auc", self.auc)]
        for target, value in self.tpr_at_fpr.items():
            rows.append((f"tpr@fpr={target}", value))
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name.ljust(width)}  {value:.6f}"
                         for name, value in rows)


def evaluate_scores(probs: np.ndarray, labels, positive_class: int = 1,
                    fpr_targets: tuple[float, ...] = DEFAULT_FPR_TARGETS,
                    tag: str | None = None) -> EvalReport:
    """Full report from softmax probabilities and integer true labels.

    Binary aggregates are positive-class rates; with more classes the
    aggregates are unweighted macro means and both macro and micro
    one-vs-rest AUCs are reported (the micro ROC backs tpr_at_fpr).
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise MetricsError("probs must be (n, K) aligned with labels")
    if probs.shape[0] == 0:
        raise MetricsError("cannot evaluate an empty set")
    row_sums = probs.sum(axis=1)
    if np.abs(row_sums - 1.0).max() > 1e-6:
        raise MetricsError("probability rows must sum to 1")
    num_classes = probs.shape[1]
    if not 0 <= positive_class < num_classes:
        raise MetricsError("positive_class out of range")

    preds = probs.argmax(axis=1)
    cm = confusion(preds, labels, num_classes)
    accuracy = float(np.trace(cm)) / float(cm.sum())

    per_class = []
    for c in range(num_classes):
        p, r, f1c = prf(cm, c)
        try:
            class_auc = auc(probs[:, c], (labels == c).astype(np.int64))
        except MetricsError:
            class_auc = None
        per_class.append({"class": c, "precision": p, "recall": r,
                          "f1": f1c, "auc": class_auc})
    macro = {
        "precision": float(np.mean([e["precision"] for e in per_class])),
        "recall": float(np.mean([e["recall"] for e in per_class])),
        "f1": float(np.mean([e["f1"] for e in per_class])),
    }

    if num_classes == 2:
        pos_scores = probs[:, positive_class]
        pos_labels = (labels == positive_class).astype(np.int64)
        headline_auc = auc(pos_scores, pos_labels)
        roc, tprs = roc_and_tpr_at_fpr(pos_scores, pos_labels, fpr_targets)
        p, r, f1v = prf(cm, positive_class)
        return EvalReport(accuracy=accuracy, precision=p, recall=r, f1=f1v,
                          auc=headline_auc, roc=roc, tpr_at_fpr=tprs,
                          confusion=cm.tolist(), per_class=per_class,
                          macro=macro, positive_class=positive_class, tag=tag)

    defined = [e["auc"] for e in per_class if e["auc"] is not None]
    macro_auc = float(np.mean(defined)) if defined else 0.0
    flat_scores = probs.flatten(order="F")
    flat_labels = np.concatenate(
        [(labels == c).astype(np.int64) for c in range(num_classes)])
    micro_auc = auc(flat_scores, flat_labels)
    roc, tprs = roc_and_tpr_at_fpr(flat_scores, flat_labels, fpr_targets)
    return EvalReport(accuracy=accuracy, precision=macro["precision"],
                      recall=macro["recall"], f1=macro["f1"], auc=macro_auc,
                      roc=roc, tpr_at_fpr=tprs, confusion=cm.tolist(),
                      per_class=per_class, macro=macro, auc_micro=micro_auc,
                      positive_class=positive_class, tag=tag)


def layer_ablation(model: UrlClassifier, seqs: list[TokenSequence], labels,
                   ks: list[int], positive_class: int = 1,
                   fpr_targets: tuple[float, ...] = DEFAULT_FPR_TARGETS,
                   batch_size: int = 64) -> list[tuple[int, EvalReport]]:
    """Evaluate one trained model keeping only its deepest k layers, per k."""
    depth = model.config.n_layers
    for k in ks:
        if not 1 <= k <= depth:
            raise MetricsError(f"ablation depth {k} outside [1, {depth}]")
    rows = []
    for k in ks:
        probs = predict_probs(model, seqs, batch_size=batch_size, last_k=k)
        rows.append((k, evaluate_scores(
            probs, labels, positive_class, fpr_targets, tag=f"layers={k}")))
    return rows


def ablation_text(rows: list[tuple[int, EvalReport]]) -> str:
    header = f"{'k':>3}  {'accuracy':>9}  {'precision':>9}  {'recall':>9}  " \
             f"{'f1':>9}  {'auc':>9}"
    lines = [header]
    for k, rep in rows:
        lines.append(f"{k:>3}  {rep.accuracy:>9.4f}  {rep.precision:>9.4f}  "
                     f"{rep.recall:>9.4f}  {rep.f1:>9.4f}  {rep.auc:>9.4f}")
    return "\n".join(lines)
