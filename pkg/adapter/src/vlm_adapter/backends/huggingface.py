"""Transformers-backed scorers and detector.

These load real checkpoints (CLIP, BLIP-2, GroundingDINO) and therefore need
the ``models`` extra installed plus downloaded weights. Imports are deferred
so the rest of the package works without torch.
"""

from __future__ import annotations

import logging
from typing import Sequence

from . import BoxDetection, softmax_normalize

log = logging.getLogger(__name__)


def _require_torch():
    try:
        import torch  # noqa: F401

        return torch
    except ImportError as exc:  # pragma: no cover - environment dependent
        raise RuntimeError(
            "transformers backends need the 'models' extra: pip install vlm-adapter[models]"
        ) from exc


class ClipRelationScorer:
    """Contrastive scoring: image-text similarity per relation sentence."""

    name = "clip"

    def __init__(self, model_id: str = "openai/clip-vit-large-patch14",
                 prompt_template: str = "The {o1} is {relation} of the {o2}.",
                 device: str = "cpu"):
        torch = _require_torch()
        from transformers import CLIPModel, CLIPProcessor

        self.device = device
        self.prompt_template = prompt_template
        self.model = CLIPModel.from_pretrained(model_id).to(device).eval()
        self.processor = CLIPProcessor.from_pretrained(model_id)
        self._torch = torch

    def score_relations(self, image, o1: str, o2: str, relations: Sequence[str]) -> dict[str, float]:
        texts = [self.prompt_template.format(o1=o1, relation=r, o2=o2) for r in relations]
        inputs = self.processor(text=texts, images=image, return_tensors="pt", padding=True)
        inputs = {k: v.to(self.device) for k, v in inputs.items()}
        with self._torch.no_grad():
            logits = self.model(**inputs).logits_per_image[0]
        raw = {r: float(v) for r, v in zip(relations, logits)}
        return softmax_normalize(raw)


class Blip2RelationScorer:
    """Generative scoring: first-token probability of each relation word."""

    name = "blip2"

    def __init__(self, model_id: str = "Salesforce/blip2-opt-2.7b",
                 question_template: str = "Question: Where is the {o1} relative to the {o2}? Answer:",
                 device: str = "cpu"):
        torch = _require_torch()
        from transformers import AutoProcessor, Blip2ForConditionalGeneration

        self.device = device
        self.question_template = question_template
        self.processor = AutoProcessor.from_pretrained(model_id)
        self.model = Blip2ForConditionalGeneration.from_pretrained(model_id).to(device).eval()
        self._torch = torch

    def score_relations(self, image, o1: str, o2: str, relations: Sequence[str]) -> dict[str, float]:
        torch = self._torch
        prompt = self.question_template.format(o1=o1, o2=o2)
        inputs = self.processor(images=image, text=prompt, return_tensors="pt").to(self.device)
        with torch.no_grad():
            generated = self.model.generate(
                **inputs, max_new_tokens=1, output_scores=True, return_dict_in_generate=True
            )
        first_token_probs = torch.softmax(generated.scores[0][0], dim=-1)
        tokenizer = self.processor.tokenizer
        raw = {}
        for relation in relations:
            token_ids = tokenizer(" " + relation, add_special_tokens=False).input_ids
            raw[relation] = float(first_token_probs[token_ids[0]]) if token_ids else 0.0
        total = sum(raw.values())
        if total <= 0:
            return {r: 1.0 / len(relations) for r in relations}
        return {r: v / total for r, v in raw.items()}


class GroundingDinoDetector:
    """Open-vocabulary detection; keeps the single best box per label."""

    name = "grounding-dino"

    def __init__(self, model_id: str = "IDEA-Research/grounding-dino-base", device: str = "cpu",
                 box_threshold: float = 0.25):
        torch = _require_torch()
        from transformers import AutoModelForZeroShotObjectDetection, AutoProcessor

        self.device = device
        self.box_threshold = box_threshold
        self.processor = AutoProcessor.from_pretrained(model_id)
        self.model = AutoModelForZeroShotObjectDetection.from_pretrained(model_id).to(device).eval()
        self._torch = torch

    def detect(self, image, label: str) -> BoxDetection:
        inputs = self.processor(images=image, text=f"{label}.", return_tensors="pt").to(self.device)
        with self._torch.no_grad():
            outputs = self.model(**inputs)
        results = self.processor.post_process_grounded_object_detection(
            outputs,
            inputs["input_ids"],
            threshold=self.box_threshold,
            target_sizes=[image.size[::-1]],
        )[0]
        if len(results["scores"]) == 0:
            return BoxDetection(label=label, score=0.0, box=None)
        best = int(results["scores"].argmax())
        x0, y0, x1, y1 = (float(v) for v in results["boxes"][best])
        return BoxDetection(label=label, score=float(results["scores"][best]), box=(x0, y0, x1, y1))
