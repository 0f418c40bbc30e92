"""Adapter configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

RELATIONS = ("left", "right", "above", "below", "near")

DEFAULT_PROMPT_TEMPLATES = ("The {o1} is {relation} of the {o2}.",)
DEFAULT_VLM_QUESTION = "Question: Where is the {o1} relative to the {o2}? Answer:"


@dataclass(frozen=True)
class AdapterConfig:
    """Model selection and emission settings.

    ``detection_threshold`` is the cutoff below which a detection is treated
    as failed (box omitted, score reported as 0).
    """

    vlm_model: str = "toy"
    detector_model: str = "toy"
    prompt_templates: tuple[str, ...] = DEFAULT_PROMPT_TEMPLATES
    detection_threshold: float = 0.3
    relations: tuple[str, ...] = RELATIONS
    batch_size: int = 8
    device: str = "cpu"

    def __post_init__(self) -> None:
        if not (0.0 < self.detection_threshold < 1.0):
            raise ValueError("detection_threshold must lie strictly inside (0,1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.relations:
            raise ValueError("relation vocabulary must not be empty")
