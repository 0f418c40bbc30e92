"""Canonical data model: spatial-claim records, JSONL ingestion, seeded splits.

One record is one claim about one image ("the dog is left of the person"),
together with the VLM's answer, both object detections, and a binary label
saying whether the VLM's answer was correct. Files are JSONL, one record per
line; a leading ``{"_meta": ...}`` header line is allowed and skipped.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

RELATIONS = ("left", "right", "above", "below", "near")
DIRECTIONAL_RELATIONS = ("left", "right", "above", "below")


class DatasetParseError(ValueError):
    """Raised when a JSONL dataset contains invalid lines.

    Carries one message per bad line, each naming the line number and field.
    """

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("\n".join(errors))


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in image coordinates (origin top-left, y grows down)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError("box coordinates must be finite")
        if any(c < 0 for c in coords):
            raise ValueError("box coordinates must be >= 0")
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError("degenerate box")

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class Detection:
    """One detector output. ``box is None`` means the detection failed."""

    label: str
    score: float
    box: BoundingBox | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError("score out of range [0,1]")

    @property
    def effective_score(self) -> float:
        """Score used for detection-quality averaging; 0 when the box is absent."""
        return self.score if self.box is not None else 0.0


@dataclass(frozen=True)
class VLMPrediction:
    """The VLM's predicted relation and its internal certainty."""

    relation: str
    token_confidence: float

    def __post_init__(self) -> None:
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation token {self.relation!r}")
        if not (0.0 <= self.token_confidence <= 1.0):
            raise ValueError("token_confidence out of range [0,1]")


@dataclass(frozen=True)
class Sample:
    """One spatial claim plus everything needed to judge the VLM on it."""

    sample_id: str
    image_id: str
    object_1: str
    object_2: str
    claimed_relation: str
    prediction: VLMPrediction
    detection_1: Detection
    detection_2: Detection
    label: bool
    image_width: float | None = None
    image_height: float | None = None

    def __post_init__(self) -> None:
        if self.claimed_relation not in RELATIONS:
            raise ValueError(f"unknown relation token {self.claimed_relation!r}")
        if self.detection_1.label != self.object_1:
            raise ValueError("det1.label does not match object_1")
        if self.detection_2.label != self.object_2:
            raise ValueError("det2.label does not match object_2")


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation fractions; the remainder is test."""

    train_fraction: float = 0.7
    validation_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.train_fraction <= 1.0):
            raise ValueError("train_fraction out of range [0,1]")
        if not (0.0 <= self.validation_fraction <= 1.0):
            raise ValueError("validation_fraction out of range [0,1]")
        if self.train_fraction + self.validation_fraction > 1.0 + 1e-12:
            raise ValueError("fractions exceed 1")


def _parse_detection(obj: dict, key: str, expected_label: str) -> Detection:
    det = obj[key]
    if not isinstance(det, dict):
        raise ValueError(f"{key} must be an object")
    for field in ("label", "score"):
        if field not in det:
            raise ValueError(f"{key}.{field}: missing required field")
    raw_box = det.get("box")
    box = None
    if raw_box is not None:
        if not (isinstance(raw_box, list) and len(raw_box) == 4):
            raise ValueError(f"{key}.box: must be [x_min,y_min,x_max,y_max] or null")
        try:
            box = BoundingBox(*(float(v) for v in raw_box))
        except ValueError as exc:
            raise ValueError(f"{key}.box: {exc}") from None
    try:
        detection = Detection(label=str(det["label"]), score=float(det["score"]), box=box)
    except ValueError as exc:
        raise ValueError(f"{key}.score: {exc}") from None
    if detection.label != expected_label:
        raise ValueError(f"{key}.label: does not match declared object name")
    return detection


_REQUIRED_FIELDS = (
    "sample_id",
    "image_id",
    "object_1",
    "object_2",
    "claimed_relation",
    "vlm_relation",
    "vlm_token_confidence",
    "det1",
    "det2",
    "label",
)


def record_to_sample(obj: dict) -> Sample:
    """Build a Sample from one decoded JSONL record, validating every field."""
    for field in _REQUIRED_FIELDS:
        if field not in obj:
            raise ValueError(f"{field}: missing required field")
    if obj["claimed_relation"] not in RELATIONS:
        raise ValueError(f"claimed_relation: unknown relation token {obj['claimed_relation']!r}")
    if obj["vlm_relation"] not in RELATIONS:
        raise ValueError(f"vlm_relation: unknown relation token {obj['vlm_relation']!r}")
    try:
        prediction = VLMPrediction(
            relation=str(obj["vlm_relation"]),
            token_confidence=float(obj["vlm_token_confidence"]),
        )
    except ValueError as exc:
        raise ValueError(f"vlm_token_confidence: {exc}") from None
    det1 = _parse_detection(obj, "det1", str(obj["object_1"]))
    det2 = _parse_detection(obj, "det2", str(obj["object_2"]))
    if not isinstance(obj["label"], bool):
        raise ValueError("label: must be true or false")
    width = obj.get("image_width")
    height = obj.get("image_height")
    return Sample(
        sample_id=str(obj["sample_id"]),
        image_id=str(obj["image_id"]),
        object_1=str(obj["object_1"]),
        object_2=str(obj["object_2"]),
        claimed_relation=str(obj["claimed_relation"]),
        prediction=prediction,
        detection_1=det1,
        detection_2=det2,
        label=obj["label"],
        image_width=float(width) if width is not None else None,
        image_height=float(height) if height is not None else None,
    )


def sample_to_record(sample: Sample) -> dict:
    """Inverse of record_to_sample; field names are part of the file format."""

    def det_dict(det: Detection) -> dict:
        return {
            "label": det.label,
            "score": det.score,
            "box": det.box.as_list() if det.box is not None else None,
        }

    record = {
        "sample_id": sample.sample_id,
        "image_id": sample.image_id,
        "object_1": sample.object_1,
        "object_2": sample.object_2,
        "claimed_relation": sample.claimed_relation,
        "vlm_relation": sample.prediction.relation,
        "vlm_token_confidence": sample.prediction.token_confidence,
        "det1": det_dict(sample.detection_1),
        "det2": det_dict(sample.detection_2),
        "label": sample.label,
    }
    if sample.image_width is not None:
        record["image_width"] = sample.image_width
    if sample.image_height is not None:
        record["image_height"] = sample.image_height
    return record


def parse_dataset(path: str | Path) -> list[Sample]:
    """Read a JSONL dataset, preserving line order.

    Lines holding only a ``_meta`` header are skipped. If any line is invalid
    the whole read fails with a DatasetParseError reporting every bad line
    (line number plus offending field).
    """
    path = Path(path)
    samples: list[Sample] = []
    errors: list[str] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(f"line {lineno}: invalid JSON: {exc.msg}")
                continue
            if isinstance(obj, dict) and "_meta" in obj:
                continue
            if not isinstance(obj, dict):
                errors.append(f"line {lineno}: record must be a JSON object")
                continue
            try:
                sample = record_to_sample(obj)
            except ValueError as exc:
                errors.append(f"line {lineno}: {exc}")
                continue
            if sample.sample_id in seen_ids:
                errors.append(f"line {lineno}: sample_id: duplicate {sample.sample_id!r}")
                continue
            seen_ids.add(sample.sample_id)
            samples.append(sample)
    if errors:
        raise DatasetParseError(errors)
    return samples


def write_dataset(samples: Iterable[Sample], path: str | Path, meta: dict | None = None) -> None:
    """Write samples as JSONL, optionally preceded by a ``_meta`` header line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for sample in samples:
            fh.write(json.dumps(sample_to_record(sample)) + "\n")


def _shuffle_key(seed: int, sample_id: str) -> bytes:
    digest = hashlib.blake2b(f"{seed}:{sample_id}".encode("utf-8"), digest_size=16)
    return digest.digest()


def split_dataset(
    samples: Sequence[Sample], spec: SplitSpec
) -> tuple[list[Sample], list[Sample], list[Sample]]:
    """Partition samples into (train, validation, test).

    Sizes are floor(n * fraction) for train and validation; the remainder is
    test. The shuffle keys on a seeded hash of sample_id, not on input order,
    so the partition is stable under file reordering.
    """
    if len(samples) < 3:
        raise ValueError("need at least 3 samples to split")
    ordered = sorted(samples, key=lambda s: (_shuffle_key(spec.seed, s.sample_id), s.sample_id))
    n = len(ordered)
    n_train = math.floor(n * spec.train_fraction)
    n_val = math.floor(n * spec.validation_fraction)
    train = ordered[:n_train]
    validation = ordered[n_train : n_train + n_val]
    test = ordered[n_train + n_val :]
    return train, validation, test
