"""Evaluation machinery: ROC/AUROC, Youden threshold, selective prediction.

Conventions used throughout: a score greater than or equal to the threshold
counts as a positive prediction, and ranking ties are resolved by stable
input order so every metric is reproducible across runs and platforms.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float


@dataclass(frozen=True)
class CoveragePoint:
    """Retention achievable at a target accuracy.

    coverage = retained / n for the largest score-ranked prefix whose mean
    correctness clears the target; 0 when no prefix qualifies.
    """

    target_accuracy: float
    coverage: float
    achieved_accuracy: float
    retained: int


@dataclass(frozen=True)
class EvalReport:
    auroc: float
    threshold: float
    precision: float
    recall: float
    f1: float
    coverage_curve: tuple[CoveragePoint, ...]
    n: int

    @property
    def unmet_targets(self) -> tuple[float, ...]:
        """Targets where even the best-ranked prefix misses the bar."""
        return tuple(p.target_accuracy for p in self.coverage_curve if p.retained == 0)

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "threshold": self.threshold,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "n": self.n,
            "coverage_curve": [
                {
                    "target_accuracy": p.target_accuracy,
                    "coverage": p.coverage,
                    "achieved_accuracy": p.achieved_accuracy,
                    "retained": p.retained,
                }
                for p in self.coverage_curve
            ],
            "unmet_targets": list(self.unmet_targets),
        }


def _check_two_classes(labels: np.ndarray, what: str) -> None:
    if labels.size == 0 or labels.min() == labels.max():
        raise ValueError(f"{what} undefined: both classes must be present")


def auroc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Probability a random positive outranks a random negative, ties at 1/2.

    Computed from tied ranks (Mann-Whitney U), which is exactly the pairwise
    estimator and equivalent to trapezoidal ROC integration.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.shape != y.shape:
        raise ValueError("scores and labels must have equal length")
    _check_two_classes(y, "AUROC")

    order = np.argsort(s, kind="stable")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # average 1-based rank of the tied block [i, j]
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1

    n_pos = float(y.sum())
    n_neg = float(y.size - n_pos)
    u = ranks[y == 1.0].sum() - n_pos * (n_pos + 1.0) / 2.0
    return u / (n_pos * n_neg)


def roc_points(scores: Sequence[float], labels: Sequence[bool]) -> list[RocPoint]:
    """ROC curve points at every distinct score, descending.

    The first point uses an infinite threshold (nothing accepted) so the
    curve starts at (fpr, tpr) = (0, 0) and ends at (1, 1).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    _check_two_classes(y, "ROC")
    n_pos = float(y.sum())
    n_neg = float(y.size - n_pos)

    order = np.argsort(-s, kind="stable")
    s_desc = s[order]
    y_desc = y[order]
    points = [RocPoint(threshold=math.inf, tpr=0.0, fpr=0.0)]
    tp = fp = 0.0
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and s_desc[j + 1] == s_desc[i]:
            j += 1
        tp += float(y_desc[i : j + 1].sum())
        fp += float(j - i + 1) - float(y_desc[i : j + 1].sum())
        points.append(RocPoint(threshold=float(s_desc[i]), tpr=tp / n_pos, fpr=fp / n_neg))
        i = j + 1
    return points


def youden_threshold(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Threshold maximizing J = TPR - FPR over candidate cuts.

    Candidates are midpoints between consecutive distinct scores; ties in J
    break toward the higher threshold. With a single distinct score there is
    no interior cut and the score itself is returned.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    _check_two_classes(y, "Youden threshold")
    distinct = np.unique(s)
    if distinct.size == 1:
        return float(distinct[0])
    candidates = (distinct[:-1] + distinct[1:]) / 2.0
    n_pos = float(y.sum())
    n_neg = float(y.size - n_pos)
    best_theta = float(candidates[0])
    best_j = -math.inf
    for theta in candidates:
        predicted = s >= theta
        tpr = float(y[predicted].sum()) / n_pos
        fpr = float((predicted & (y == 0.0)).sum()) / n_neg
        j = tpr - fpr
        if j >= best_j:  # >= pushes ties to the higher threshold
            best_j = j
            best_theta = float(theta)
    return best_theta


def threshold_metrics(
    scores: Sequence[float], labels: Sequence[bool], threshold: float
) -> tuple[float, float, float]:
    """(precision, recall, f1) predicting positive iff score >= threshold."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    predicted = s >= threshold
    tp = float((predicted & (y == 1.0)).sum())
    fp = float((predicted & (y == 0.0)).sum())
    fn = float((~predicted & (y == 1.0)).sum())
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def coverage_at_accuracy(
    scores: Sequence[float], correctness: Sequence[bool], target: float
) -> CoveragePoint:
    """Largest score-ranked prefix whose mean correctness clears the target.

    Prefix accuracy is not monotone, so the whole ranking is scanned and the
    largest qualifying prefix wins. Sorting is stable on input order.
    """
    s = np.asarray(scores, dtype=np.float64)
    c = np.asarray(correctness, dtype=np.float64)
    if s.size == 0:
        raise ValueError("coverage undefined on empty input")
    order = np.argsort(-s, kind="stable")
    prefix_acc = np.cumsum(c[order]) / np.arange(1, s.size + 1)
    qualifying = np.nonzero(prefix_acc >= target)[0]
    if qualifying.size == 0:
        return CoveragePoint(target_accuracy=target, coverage=0.0, achieved_accuracy=0.0, retained=0)
    k = int(qualifying[-1]) + 1
    return CoveragePoint(
        target_accuracy=target,
        coverage=k / s.size,
        achieved_accuracy=float(prefix_acc[k - 1]),
        retained=k,
    )


def coverage_curve(
    scores: Sequence[float], correctness: Sequence[bool], targets: Sequence[float]
) -> list[CoveragePoint]:
    return [coverage_at_accuracy(scores, correctness, t) for t in targets]


def evaluate(
    scores: Sequence[float],
    labels: Sequence[bool],
    targets: Sequence[float],
    threshold: float | None = None,
) -> EvalReport:
    """Assemble the full report; the threshold defaults to the Youden optimum."""
    if threshold is None:
        threshold = youden_threshold(scores, labels)
    precision, recall, f1 = threshold_metrics(scores, labels, threshold)
    return EvalReport(
        auroc=auroc(scores, labels),
        threshold=threshold,
        precision=precision,
        recall=recall,
        f1=f1,
        coverage_curve=tuple(coverage_curve(scores, labels, targets)),
        n=len(labels),
    )


def write_roc_csv(points: Sequence[RocPoint], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "tpr", "fpr"])
        for p in points:
            writer.writerow([p.threshold, p.tpr, p.fpr])


def write_coverage_csv(points: Sequence[CoveragePoint], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["target", "coverage", "achieved_accuracy", "retained"])
        for p in points:
            writer.writerow([p.target_accuracy, p.coverage, p.achieved_accuracy, p.retained])


def write_report_json(report: EvalReport, path: str | Path, timestamp: str | None = None) -> None:
    payload = report.to_dict()
    if timestamp is not None:
        payload["generated_at"] = timestamp
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
