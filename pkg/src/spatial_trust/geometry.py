"""Geometric validation signals for spatial claims.

Everything a claim can be checked against from two bounding boxes: box
centers, the coordinate-implied relation, an alignment score between the
VLM's answer and that relation, box overlap, and the fused four-component
feature vector consumed by the boosted classifier.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .records import BoundingBox, Sample

# Alignment scoring constants: contradictions score MISMATCH_SCORE; agreements
# ramp linearly from 0.5 to 1.0 as the dominant-axis displacement grows to
# RAMP_SCALE_PX. The detection-quality multiplier is a sigmoid gate centred at
# detector score 0.3 (the usual detection cutoff), mapping into (0.5, 1.0).
MISMATCH_SCORE = 0.2
RAMP_SCALE_PX = 100.0
NORMALIZED_RAMP_SCALE = 0.1
QUALITY_GATE_CENTER = 0.3
QUALITY_GATE_SHARPNESS = 10.0

FEATURE_NAMES = ("alpha_geo", "alpha_sep", "detection_quality", "token_confidence")


@dataclass(frozen=True)
class Center:
    x: float
    y: float


@dataclass(frozen=True)
class GeoOutcome:
    """Coordinate-derived relation between two objects.

    ``valid`` is False when no directional outcome exists: a detection is
    missing or the two centers coincide. Deltas are measured object_2 minus
    object_1 in the image frame (y grows downward).
    """

    relation: str | None
    delta_x: float
    delta_y: float
    d_primary: float
    valid: bool

    @property
    def center_distance(self) -> float:
        return math.hypot(self.delta_x, self.delta_y)


INVALID_OUTCOME = GeoOutcome(relation=None, delta_x=0.0, delta_y=0.0, d_primary=0.0, valid=False)


@dataclass(frozen=True)
class FeatureVector:
    """The four fused signals, each in [0, 1]."""

    alpha_geo: float
    alpha_sep: float
    detection_quality: float
    token_confidence: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.alpha_geo, self.alpha_sep, self.detection_quality, self.token_confidence],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class GeometryConfig:
    """Knobs for feature extraction.

    ``near_kappa`` scales the near-claim distance threshold (kappa times the
    mean box diagonal). ``normalized`` switches the alignment ramp to
    width-relative displacements (ramp constant 0.1) instead of raw pixels;
    off by default. ``use_adjusted`` controls whether the fused alpha_geo is
    multiplied by the detection-quality gate.
    """

    near_kappa: float = 1.0
    normalized: bool = False
    use_adjusted: bool = True


def center(box: BoundingBox) -> Center:
    """Box midpoint."""
    return Center(x=(box.x_min + box.x_max) / 2.0, y=(box.y_min + box.y_max) / 2.0)


def classify_relation(p1: Center, p2: Center) -> GeoOutcome:
    """Directional relation of object 1 relative to object 2 from centers.

    Dominant axis wins: left/right when |dx| > |dy| (sign of dx decides),
    above/below otherwise. In the image frame "above" means object 1 sits at
    smaller y. An exact |dx| == |dy| tie resolves to the horizontal case;
    coincident centers yield no relation (valid=False).
    """
    dx = p2.x - p1.x
    dy = p2.y - p1.y
    if dx == 0.0 and dy == 0.0:
        return GeoOutcome(relation=None, delta_x=0.0, delta_y=0.0, d_primary=0.0, valid=False)
    if abs(dx) >= abs(dy):
        relation = "left" if dx > 0 else "right"
        d_primary = abs(dx)
    else:
        relation = "above" if dy > 0 else "below"
        d_primary = abs(dy)
    return GeoOutcome(relation=relation, delta_x=dx, delta_y=dy, d_primary=d_primary, valid=True)


def quality_multiplier(mean_quality: float) -> float:
    """Detection-quality gate in (0.5, 1.0); equals 0.75 at quality 0.3."""
    z = QUALITY_GATE_SHARPNESS * (mean_quality - QUALITY_GATE_CENTER)
    return 0.5 + 0.5 / (1.0 + math.exp(-z))


def alignment_score(
    predicted: str,
    geo: GeoOutcome,
    *,
    ramp_scale: float = RAMP_SCALE_PX,
    near_threshold: float | None = None,
) -> float:
    """Raw (unadjusted) agreement between the predicted relation and geometry.

    Directional predictions match when they equal the coordinate-derived
    relation; "near" matches when the center distance is within
    near_threshold, with the remaining slack fed to the same ramp. Any
    contradiction scores MISMATCH_SCORE.
    """
    if predicted == "near":
        if near_threshold is None:
            raise ValueError("near claim requires a distance threshold")
        slack = near_threshold - geo.center_distance
        if slack < 0:
            return MISMATCH_SCORE
        return 0.5 + 0.5 * min(1.0, slack / ramp_scale)
    if geo.relation is None or predicted != geo.relation:
        return MISMATCH_SCORE
    return 0.5 + 0.5 * min(1.0, geo.d_primary / ramp_scale)


def geometric_confidence(
    predicted: str,
    geo: GeoOutcome,
    mean_quality: float,
    *,
    ramp_scale: float = RAMP_SCALE_PX,
    near_threshold: float | None = None,
    adjusted: bool = True,
) -> float:
    """Alignment score, optionally gated by mean detection quality.

    The caller must have both detections; missing-detection samples take the
    zero-feature path in extract_features instead.
    """
    raw = alignment_score(predicted, geo, ramp_scale=ramp_scale, near_threshold=near_threshold)
    if not adjusted:
        return raw
    return raw * quality_multiplier(mean_quality)


def iou(b1: BoundingBox, b2: BoundingBox) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    ix = max(0.0, min(b1.x_max, b2.x_max) - max(b1.x_min, b2.x_min))
    iy = max(0.0, min(b1.y_max, b2.y_max) - max(b1.y_min, b2.y_min))
    inter = ix * iy
    if inter == 0.0:
        return 0.0
    area1 = (b1.x_max - b1.x_min) * (b1.y_max - b1.y_min)
    area2 = (b2.x_max - b2.x_min) * (b2.y_max - b2.y_min)
    return inter / (area1 + area2 - inter)


def separation_confidence(b1: BoundingBox, b2: BoundingBox) -> float:
    """1 - IoU: high overlap means an ambiguous spatial relationship."""
    return 1.0 - iou(b1, b2)


def _mean_diagonal(b1: BoundingBox, b2: BoundingBox) -> float:
    d1 = math.hypot(b1.x_max - b1.x_min, b1.y_max - b1.y_min)
    d2 = math.hypot(b2.x_max - b2.x_min, b2.y_max - b2.y_min)
    return (d1 + d2) / 2.0


def extract_features(
    sample: Sample, config: GeometryConfig = GeometryConfig()
) -> tuple[FeatureVector, GeoOutcome]:
    """Compute the fused feature vector and the geometric outcome for a sample.

    Missing detections are a defined path, not an error: the geometric signals
    are zeroed (no evidence either way), the missing detection contributes 0
    to mean quality, and the token confidence passes through untouched.
    """
    det1, det2 = sample.detection_1, sample.detection_2
    mean_quality = (det1.effective_score + det2.effective_score) / 2.0
    token_conf = sample.prediction.token_confidence

    if det1.box is None or det2.box is None:
        features = FeatureVector(
            alpha_geo=0.0,
            alpha_sep=0.0,
            detection_quality=mean_quality,
            token_confidence=token_conf,
        )
        return features, INVALID_OUTCOME

    geo = classify_relation(center(det1.box), center(det2.box))
    ramp_scale = RAMP_SCALE_PX
    if config.normalized:
        if sample.image_width is None:
            raise ValueError("normalized mode requires image_width on the sample")
        ramp_scale = NORMALIZED_RAMP_SCALE * sample.image_width
    near_threshold = config.near_kappa * _mean_diagonal(det1.box, det2.box)
    alpha_geo = geometric_confidence(
        sample.prediction.relation,
        geo,
        mean_quality,
        ramp_scale=ramp_scale,
        near_threshold=near_threshold,
        adjusted=config.use_adjusted,
    )
    features = FeatureVector(
        alpha_geo=alpha_geo,
        alpha_sep=separation_confidence(det1.box, det2.box),
        detection_quality=mean_quality,
        token_confidence=token_conf,
    )
    return features, geo


def feature_matrix(
    samples: Sequence[Sample], config: GeometryConfig = GeometryConfig()
) -> np.ndarray:
    """Stack extract_features over samples into an (n, 4) matrix."""
    if not samples:
        return np.zeros((0, len(FEATURE_NAMES)))
    return np.array([extract_features(s, config)[0].as_array() for s in samples])


def write_feature_csv(
    samples: Iterable[Sample], path: str | Path, config: GeometryConfig = GeometryConfig()
) -> None:
    """Dump per-sample features and labels for offline analysis."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", *FEATURE_NAMES, "label"])
        for sample in samples:
            features, _ = extract_features(sample, config)
            writer.writerow(
                [
                    sample.sample_id,
                    features.alpha_geo,
                    features.alpha_sep,
                    features.detection_quality,
                    features.token_confidence,
                    int(sample.label),
                ]
            )
