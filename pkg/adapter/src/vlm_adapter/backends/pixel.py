"""Deterministic pixel-analysis backend for flat-color test scenes.

Detects objects named "<color> block" by color masking and scores relations
from the displacement between detected centers. No model weights, no
randomness: suitable for smoke tests, fixtures, and offline development.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from PIL import Image

from . import BoxDetection, softmax_normalize

COLOR_TABLE = {
    "red": (220, 40, 40),
    "blue": (40, 60, 220),
    "green": (40, 180, 70),
    "yellow": (230, 200, 40),
    "purple": (150, 40, 180),
}

COLOR_TOLERANCE = 40.0
SCORE_SHARPNESS = 4.0


def _color_for(label: str) -> tuple[int, int, int] | None:
    return COLOR_TABLE.get(label.split()[0])


class PixelDetector:
    name = "pixel-color-mask"

    def detect(self, image: Image.Image, label: str) -> BoxDetection:
        color = _color_for(label)
        if color is None:
            return BoxDetection(label=label, score=0.0, box=None)
        pixels = np.asarray(image.convert("RGB"), dtype=np.float64)
        distance = np.linalg.norm(pixels - np.array(color, dtype=np.float64), axis=-1)
        mask = distance < COLOR_TOLERANCE
        if not mask.any():
            return BoxDetection(label=label, score=0.0, box=None)
        rows, cols = np.nonzero(mask)
        box = (float(cols.min()), float(rows.min()), float(cols.max() + 1), float(rows.max() + 1))
        # fill ratio of the mask inside its box: 1.0 for clean rectangles
        area = (box[2] - box[0]) * (box[3] - box[1])
        score = min(1.0, float(mask.sum()) / area)
        return BoxDetection(label=label, score=score, box=box)


class PixelRelationScorer:
    """Relation scores from detected-center displacement, softmax-normalized.

    Directional evidence saturates with distance (a tiny offset between
    near-coincident blocks is weak evidence of "left"), while the near score
    decays with distance; the crossover sits around 1.2 mean box diagonals.
    """

    name = "pixel-displacement"

    def __init__(self, detector: PixelDetector | None = None):
        self.detector = detector or PixelDetector()

    def score_relations(
        self, image: Image.Image, o1: str, o2: str, relations: Sequence[str]
    ) -> dict[str, float]:
        det1 = self.detector.detect(image, o1)
        det2 = self.detector.detect(image, o2)
        if det1.box is None or det2.box is None:
            return softmax_normalize({r: 0.0 for r in relations})

        c1 = ((det1.box[0] + det1.box[2]) / 2, (det1.box[1] + det1.box[3]) / 2)
        c2 = ((det2.box[0] + det2.box[2]) / 2, (det2.box[1] + det2.box[3]) / 2)
        dx, dy = c2[0] - c1[0], c2[1] - c1[1]
        distance = math.hypot(dx, dy)
        mean_diag = (
            math.hypot(det1.box[2] - det1.box[0], det1.box[3] - det1.box[1])
            + math.hypot(det2.box[2] - det2.box[0], det2.box[3] - det2.box[1])
        ) / 2.0
        if distance > 0:
            strength = min(1.0, distance / (3.0 * mean_diag))
            ux, uy = dx / distance * strength, dy / distance * strength
        else:
            ux = uy = 0.0

        # image frame: o1 left of o2 means positive dx; above means positive dy
        direction = {"left": ux, "right": -ux, "above": uy, "below": -uy}
        raw = {}
        for relation in relations:
            if relation == "near":
                raw[relation] = max(-1.0, 1.0 - distance / (2.0 * mean_diag))
            else:
                raw[relation] = direction.get(relation, -1.0)
        return softmax_normalize(raw, temperature=1.0 / SCORE_SHARPNESS)
