"""Backend protocols and the shared score-normalization helper."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np


@dataclass(frozen=True)
class BoxDetection:
    """Raw detector output for one label; box is (x_min, y_min, x_max, y_max)."""

    label: str
    score: float
    box: tuple[float, float, float, float] | None


class RelationScorer(Protocol):
    """Scores every vocabulary relation for an (image, object pair) query."""

    name: str

    def score_relations(self, image, o1: str, o2: str, relations: Sequence[str]) -> dict[str, float]:
        ...


class ObjectDetector(Protocol):
    """Finds the best box for a named object in an image."""

    name: str

    def detect(self, image, label: str) -> BoxDetection:
        ...


def softmax_normalize(raw_scores: dict[str, float], temperature: float = 1.0) -> dict[str, float]:
    """Map raw similarities to [0,1] scores summing to 1 (softmax).

    Keeps emitted token confidences inside the unit interval for contrastive
    and heuristic scorers alike.
    """
    keys = list(raw_scores)
    values = np.array([raw_scores[k] for k in keys], dtype=np.float64) / temperature
    values -= values.max()
    exp = np.exp(values)
    probs = exp / exp.sum()
    return {k: float(p) for k, p in zip(keys, probs)}


def argmax_relation(scores: dict[str, float]) -> str:
    """Highest-scoring relation; first in iteration order on exact ties."""
    best = None
    for relation, score in scores.items():
        if best is None or score > scores[best]:
            best = relation
    return best
