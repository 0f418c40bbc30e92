"""Per-image scene graphs with confidence-pruned relation edges."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .records import Sample


@dataclass(frozen=True)
class Edge:
    subject: str
    relation: str
    object: str
    confidence: float
    correct: bool | None = None


@dataclass(frozen=True)
class SceneGraph:
    image_id: str
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "vertices": list(self.vertices),
            "edges": [
                {
                    "s": e.subject,
                    "r": e.relation,
                    "o": e.object,
                    "confidence": e.confidence,
                    "correct": e.correct,
                }
                for e in self.edges
            ],
        }


@dataclass(frozen=True)
class GraphMetrics:
    tau: float
    precision: float
    edge_coverage: float
    f1: float
    retained: int
    total: int


def build_graphs(
    samples: Sequence[Sample], confidences: Sequence[float], tau: float
) -> list[SceneGraph]:
    """One graph per image: all mentioned objects as vertices, and an edge for
    every VLM-predicted relation whose fused confidence clears tau.

    Repeated claims on the same object pair stay separate candidate edges.
    Graphs follow first-appearance order of image ids; vertices are sorted.
    """
    if len(samples) != len(confidences):
        raise ValueError("confidences must align one-to-one with samples")
    vertices: dict[str, list[str]] = {}
    edges: dict[str, list[Edge]] = {}
    for sample, confidence in zip(samples, confidences):
        image_vertices = vertices.setdefault(sample.image_id, [])
        for name in (sample.object_1, sample.object_2):
            if name not in image_vertices:
                image_vertices.append(name)
        if confidence >= tau:
            edges.setdefault(sample.image_id, []).append(
                Edge(
                    subject=sample.object_1,
                    relation=sample.prediction.relation,
                    object=sample.object_2,
                    confidence=float(confidence),
                    correct=sample.label,
                )
            )
    return [
        SceneGraph(
            image_id=image_id,
            vertices=tuple(sorted(names)),
            edges=tuple(edges.get(image_id, [])),
        )
        for image_id, names in vertices.items()
    ]


def sweep_tau(
    samples: Sequence[Sample], confidences: Sequence[float], taus: Sequence[float]
) -> list[GraphMetrics]:
    """Edge precision/coverage trade-off across confidence cutoffs.

    Precision is the correct fraction of retained edges (0 when none are
    retained); coverage is retained/total; f1 is their harmonic mean.
    """
    if len(samples) != len(confidences):
        raise ValueError("confidences must align one-to-one with samples")
    total = len(samples)
    out = []
    for tau in taus:
        retained_flags = [c >= tau for c in confidences]
        retained = sum(retained_flags)
        correct = sum(1 for keep, s in zip(retained_flags, samples) if keep and s.label)
        precision = correct / retained if retained > 0 else 0.0
        coverage = retained / total if total > 0 else 0.0
        f1 = (
            2 * precision * coverage / (precision + coverage)
            if precision + coverage > 0
            else 0.0
        )
        out.append(
            GraphMetrics(
                tau=float(tau),
                precision=precision,
                edge_coverage=coverage,
                f1=f1,
                retained=retained,
                total=total,
            )
        )
    return out


def write_graphs_json(graphs: Sequence[SceneGraph], path: str | Path) -> None:
    payload = [g.to_dict() for g in graphs]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_metrics_csv(metrics: Sequence[GraphMetrics], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "precision", "coverage", "f1", "retained", "total"])
        for m in metrics:
            writer.writerow([m.tau, m.precision, m.edge_coverage, m.f1, m.retained, m.total])
