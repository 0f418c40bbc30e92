from __future__ import annotations

import pytest

from spatial_trust.records import BoundingBox, Detection, Sample, VLMPrediction


def make_sample(
    sample_id: str = "s1",
    image_id: str = "img1",
    claimed: str = "left",
    predicted: str = "left",
    token_confidence: float = 0.8,
    box1: tuple | None = (0, 0, 20, 20),
    box2: tuple | None = (100, 0, 120, 20),
    score1: float = 0.9,
    score2: float = 0.9,
    label: bool = True,
    image_width: float = 640.0,
    image_height: float = 480.0,
) -> Sample:
    return Sample(
        sample_id=sample_id,
        image_id=image_id,
        object_1="cup",
        object_2="plate",
        claimed_relation=claimed,
        prediction=VLMPrediction(relation=predicted, token_confidence=token_confidence),
        detection_1=Detection(
            label="cup", score=score1, box=BoundingBox(*box1) if box1 else None
        ),
        detection_2=Detection(
            label="plate", score=score2, box=BoundingBox(*box2) if box2 else None
        ),
        label=label,
        image_width=image_width,
        image_height=image_height,
    )


@pytest.fixture
def sample_factory():
    return make_sample
