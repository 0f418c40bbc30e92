"""Seeded synthetic scene generator with known ground truth.

Stands in for a real benchmark plus real models at desk scale: boxes are
placed uniformly, the true relation follows from their centers, and a
configurable error model decides when the simulated VLM answers wrong. The
error rate rises when boxes overlap or sit close together, so the geometric
features carry genuine signal, while the simulated token confidence is only
weakly informative by design.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable

import numpy as np

from .geometry import center, classify_relation, iou
from .records import RELATIONS, BoundingBox, Detection, Sample, VLMPrediction

DETECTION_CUTOFF = 0.3
OVERLAP_ERROR_IOU = 0.3
PROXIMITY_ERROR_PX = 30.0

MIN_BOX_SIDE = 20.0


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int
    seed: int = 0
    image_width: float = 640.0
    image_height: float = 480.0
    detector_noise_sigma: float = 5.0
    detection_failure_rate: float = 0.08
    detection_score_mean: float = 0.78
    detection_score_spread: float = 0.12
    vlm_base_error: float = 0.25
    vlm_error_boost: float = 0.30
    token_mean_correct: float = 0.68
    token_mean_wrong: float = 0.60
    token_spread: float = 0.18
    false_claim_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.n_samples < 0:
            raise ValueError("n_samples must be >= 0")
        for name in ("detection_failure_rate", "vlm_base_error", "false_claim_rate"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} out of range [0,1]: {value}")
        if self.vlm_error_boost < 0 or self.vlm_error_boost > 1:
            raise ValueError(f"vlm_error_boost out of range [0,1]: {self.vlm_error_boost}")
        if self.image_width < 4 * MIN_BOX_SIDE or self.image_height < 4 * MIN_BOX_SIDE:
            raise ValueError("image too small for two non-degenerate boxes")
        if self.detector_noise_sigma < 0:
            raise ValueError("detector_noise_sigma must be >= 0")


@dataclass(frozen=True)
class TruthRecord:
    """Hidden per-sample ground truth for oracle checks."""

    sample_id: str
    true_box_1: list[float]
    true_box_2: list[float]
    true_relation: str
    d_primary: float
    iou: float
    error_rate: float
    vlm_flipped: bool

    def to_dict(self) -> dict:
        return asdict(self)


_OBJECT_NAMES = (
    "cup", "plate", "book", "lamp", "chair", "plant", "shoe", "clock",
    "bottle", "phone", "bag", "hat",
)


def _random_box(rng: np.random.Generator, width: float, height: float) -> BoundingBox:
    w = rng.uniform(MIN_BOX_SIDE, width / 2.0)
    h = rng.uniform(MIN_BOX_SIDE, height / 2.0)
    x0 = rng.uniform(0.0, width - w)
    y0 = rng.uniform(0.0, height - h)
    return BoundingBox(x0, y0, x0 + w, y0 + h)


def _jitter_box(
    rng: np.random.Generator, box: BoundingBox, sigma: float, width: float, height: float
) -> BoundingBox:
    """Shift the box center by detector noise, keeping it inside the image."""
    dx = rng.normal(0.0, sigma) if sigma > 0 else 0.0
    dy = rng.normal(0.0, sigma) if sigma > 0 else 0.0
    w = box.x_max - box.x_min
    h = box.y_max - box.y_min
    x0 = min(max(box.x_min + dx, 0.0), width - w)
    y0 = min(max(box.y_min + dy, 0.0), height - h)
    return BoundingBox(x0, y0, x0 + w, y0 + h)


def _clamped_normal(rng: np.random.Generator, mean: float, spread: float) -> float:
    if spread <= 0:
        return min(1.0, max(0.0, mean))
    return float(min(1.0, max(0.0, rng.normal(mean, spread))))


def _simulate_detection(
    rng: np.random.Generator, label: str, true_box: BoundingBox, config: SynthConfig
) -> Detection:
    # Draw order is fixed so a seed always yields the same stream.
    missed = rng.random() < config.detection_failure_rate
    score = _clamped_normal(rng, config.detection_score_mean, config.detection_score_spread)
    if missed:
        # Object missed entirely: report a sub-cutoff score with no box.
        return Detection(label=label, score=float(rng.uniform(0.0, DETECTION_CUTOFF)), box=None)
    if score < DETECTION_CUTOFF:
        # Low-confidence detection falls below the cutoff and is dropped.
        return Detection(label=label, score=score, box=None)
    box = _jitter_box(
        rng, true_box, config.detector_noise_sigma, config.image_width, config.image_height
    )
    return Detection(label=label, score=score, box=box)


def generate(config: SynthConfig) -> tuple[list[Sample], list[TruthRecord]]:
    """Produce samples plus the hidden truth sidecar, deterministically per seed."""
    rng = np.random.default_rng(config.seed)
    samples: list[Sample] = []
    truths: list[TruthRecord] = []
    directional = [r for r in RELATIONS if r != "near"]

    for index in range(config.n_samples):
        while True:
            box1 = _random_box(rng, config.image_width, config.image_height)
            box2 = _random_box(rng, config.image_width, config.image_height)
            geo = classify_relation(center(box1), center(box2))
            if geo.valid:
                break
        true_relation = geo.relation
        assert true_relation in directional

        overlap = iou(box1, box2)
        boosted = overlap > OVERLAP_ERROR_IOU or geo.d_primary < PROXIMITY_ERROR_PX
        error_rate = min(
            1.0, config.vlm_base_error + (config.vlm_error_boost if boosted else 0.0)
        )
        flipped = rng.random() < error_rate
        if flipped:
            alternatives = [r for r in RELATIONS if r != true_relation]
            predicted = alternatives[int(rng.integers(len(alternatives)))]
        else:
            predicted = true_relation
        label = predicted == true_relation

        claimed = true_relation
        if config.false_claim_rate > 0 and rng.random() < config.false_claim_rate:
            wrong_claims = [r for r in RELATIONS if r != true_relation]
            claimed = wrong_claims[int(rng.integers(len(wrong_claims)))]

        token_mean = config.token_mean_correct if label else config.token_mean_wrong
        token_confidence = _clamped_normal(rng, token_mean, config.token_spread)

        name1, name2 = rng.choice(len(_OBJECT_NAMES), size=2, replace=False)
        object_1 = _OBJECT_NAMES[int(name1)]
        object_2 = _OBJECT_NAMES[int(name2)]

        det1 = _simulate_detection(rng, object_1, box1, config)
        det2 = _simulate_detection(rng, object_2, box2, config)

        sample_id = f"synth-{config.seed}-{index:06d}"
        samples.append(
            Sample(
                sample_id=sample_id,
                image_id=f"img-{config.seed}-{index // 4:06d}",
                object_1=object_1,
                object_2=object_2,
                claimed_relation=claimed,
                prediction=VLMPrediction(relation=predicted, token_confidence=token_confidence),
                detection_1=det1,
                detection_2=det2,
                label=label,
                image_width=config.image_width,
                image_height=config.image_height,
            )
        )
        truths.append(
            TruthRecord(
                sample_id=sample_id,
                true_box_1=box1.as_list(),
                true_box_2=box2.as_list(),
                true_relation=true_relation,
                d_primary=geo.d_primary,
                iou=overlap,
                error_rate=error_rate,
                vlm_flipped=flipped,
            )
        )
    return samples, truths


def write_truth_sidecar(truths: Iterable[TruthRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for truth in truths:
            fh.write(json.dumps(truth.to_dict()) + "\n")
