"""Run backends over a claim manifest and emit canonical JSONL records.

Manifest input is VSR-style JSONL, one claim per line:

    {"sample_id": "c1", "image": "scenes/img1.png", "object_1": "red block",
     "object_2": "blue block", "claimed_relation": "left", "claim_holds": true}

Output is the record schema consumed by the spatial-trust pipeline, preceded
by one ``{"_meta": ...}`` header describing the backends and normalization.
The correctness label marks whether the VLM's answer validates a true claim
or refutes a false one. Per-sample inference failures are logged and the
sample is skipped; a malformed manifest line is an error.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from PIL import Image

from .backends import BoxDetection, ObjectDetector, RelationScorer, argmax_relation
from .config import AdapterConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Claim:
    sample_id: str
    image: str
    object_1: str
    object_2: str
    claimed_relation: str
    claim_holds: bool


def read_manifest(path: str | Path) -> list[Claim]:
    claims = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                claims.append(
                    Claim(
                        sample_id=str(obj["sample_id"]),
                        image=str(obj["image"]),
                        object_1=str(obj["object_1"]),
                        object_2=str(obj["object_2"]),
                        claimed_relation=str(obj["claimed_relation"]),
                        claim_holds=bool(obj["claim_holds"]),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"manifest line {lineno}: {exc}") from None
    return claims


def build_backends(config: AdapterConfig) -> tuple[RelationScorer, ObjectDetector]:
    """Resolve backend names; "toy"/"pixel" run offline, the rest need weights."""
    from .backends.pixel import PixelDetector, PixelRelationScorer

    if config.detector_model in ("toy", "pixel"):
        detector = PixelDetector()
    else:
        from .backends.huggingface import GroundingDinoDetector

        detector = GroundingDinoDetector(config.detector_model, device=config.device)

    if config.vlm_model in ("toy", "pixel"):
        scorer = PixelRelationScorer(detector if isinstance(detector, PixelDetector) else None)
    elif config.vlm_model.startswith("clip"):
        from .backends.huggingface import ClipRelationScorer

        _, _, model_id = config.vlm_model.partition(":")
        scorer = ClipRelationScorer(
            model_id or "openai/clip-vit-large-patch14",
            prompt_template=config.prompt_templates[0],
            device=config.device,
        )
    elif config.vlm_model.startswith("blip2"):
        from .backends.huggingface import Blip2RelationScorer

        _, _, model_id = config.vlm_model.partition(":")
        scorer = Blip2RelationScorer(
            model_id or "Salesforce/blip2-opt-2.7b", device=config.device
        )
    else:
        raise ValueError(f"unknown vlm_model {config.vlm_model!r}")
    return scorer, detector


def _detection_dict(raw: BoxDetection, threshold: float) -> dict:
    """Apply the detection cutoff: below it the box is dropped and score zeroed."""
    if raw.box is None or raw.score < threshold:
        return {"label": raw.label, "score": 0.0, "box": None}
    return {"label": raw.label, "score": min(1.0, raw.score), "box": list(raw.box)}


def detect_pair(
    image: Image.Image, o1: str, o2: str, detector: ObjectDetector, threshold: float
) -> tuple[dict, dict]:
    """Best box per object, with the cutoff applied to each side."""
    return (
        _detection_dict(detector.detect(image, o1), threshold),
        _detection_dict(detector.detect(image, o2), threshold),
    )


def claim_to_record(
    claim: Claim,
    image: Image.Image,
    scorer: RelationScorer,
    detector: ObjectDetector,
    config: AdapterConfig,
) -> dict:
    scores = scorer.score_relations(image, claim.object_1, claim.object_2, config.relations)
    predicted = argmax_relation(scores)
    token_confidence = scores[predicted]
    det1, det2 = detect_pair(
        image, claim.object_1, claim.object_2, detector, config.detection_threshold
    )
    # VLM is correct when it validates a true claim or contradicts a false one.
    vlm_correct = (predicted == claim.claimed_relation) == claim.claim_holds
    return {
        "sample_id": claim.sample_id,
        "image_id": Path(claim.image).stem,
        "object_1": claim.object_1,
        "object_2": claim.object_2,
        "claimed_relation": claim.claimed_relation,
        "vlm_relation": predicted,
        "vlm_token_confidence": token_confidence,
        "det1": det1,
        "det2": det2,
        "label": vlm_correct,
        "image_width": float(image.size[0]),
        "image_height": float(image.size[1]),
    }


def iter_records(
    claims: Iterable[Claim],
    config: AdapterConfig,
    image_root: str | Path,
    scorer: RelationScorer | None = None,
    detector: ObjectDetector | None = None,
) -> Iterator[dict]:
    if scorer is None or detector is None:
        built_scorer, built_detector = build_backends(config)
        scorer = scorer or built_scorer
        detector = detector or built_detector
    root = Path(image_root)
    for claim in claims:
        try:
            with Image.open(root / claim.image) as image:
                yield claim_to_record(claim, image, scorer, detector, config)
        except Exception:
            log.warning("skipping sample %s: inference failed", claim.sample_id, exc_info=True)


def run_adapter(
    manifest_path: str | Path,
    out_path: str | Path,
    config: AdapterConfig = AdapterConfig(),
    scorer: RelationScorer | None = None,
    detector: ObjectDetector | None = None,
) -> int:
    """Process a manifest into a records file; returns the number emitted."""
    manifest_path = Path(manifest_path)
    claims = read_manifest(manifest_path)
    meta = {
        "vlm_model": config.vlm_model,
        "detector_model": config.detector_model,
        "normalization": "softmax over relation scores",
        "detection_threshold": config.detection_threshold,
        "prompt_templates": list(config.prompt_templates),
        "relations": list(config.relations),
    }
    emitted = 0
    with Path(out_path).open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"_meta": meta}, sort_keys=True) + "\n")
        for record in iter_records(claims, config, manifest_path.parent, scorer, detector):
            fh.write(json.dumps(record) + "\n")
            emitted += 1
    log.info("emitted %d/%d records to %s", emitted, len(claims), out_path)
    return emitted
