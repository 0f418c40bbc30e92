"""Regenerate the bundled fixture scenes and manifest.

Five tiny flat-color scenes, each holding two blocks the pixel backend can
find. Run from this directory: python3 make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from PIL import Image, ImageDraw

COLORS = {
    "red": (220, 40, 40),
    "blue": (40, 60, 220),
    "green": (40, 180, 70),
    "yellow": (230, 200, 40),
    "purple": (150, 40, 180),
}

SIZE = (96, 72)
BLOCK = (18, 14)

# (image, o1 color, o1 position, o2 color, o2 position, claim, claim_holds)
# scene5 is an annotation-vs-geometry disagreement: the claim is marked true
# but the pixel layout is left-dominant, so a displacement scorer errs there.
SCENES = [
    ("scene1.png", "red", (8, 30), "blue", (70, 30), "left", True),
    ("scene2.png", "green", (40, 6), "yellow", (40, 52), "above", True),
    ("scene3.png", "red", (70, 30), "green", (8, 30), "left", False),
    ("scene4.png", "blue", (34, 28), "yellow", (56, 30), "near", True),
    ("scene5.png", "purple", (30, 44), "red", (62, 28), "above", True),
]


def draw_scene(path: Path, c1: str, p1: tuple, c2: str, p2: tuple) -> None:
    image = Image.new("RGB", SIZE, (255, 255, 255))
    draw = ImageDraw.Draw(image)
    for color, (x, y) in ((c1, p1), (c2, p2)):
        draw.rectangle([x, y, x + BLOCK[0] - 1, y + BLOCK[1] - 1], fill=COLORS[color])
    image.save(path)


def main() -> None:
    here = Path(__file__).parent
    manifest_lines = []
    for index, (name, c1, p1, c2, p2, claim, holds) in enumerate(SCENES):
        draw_scene(here / name, c1, p1, c2, p2)
        manifest_lines.append(
            {
                "sample_id": f"fixture-{index}",
                "image": name,
                "object_1": f"{c1} block",
                "object_2": f"{c2} block",
                "claimed_relation": claim,
                "claim_holds": holds,
            }
        )
    with (here / "manifest.jsonl").open("w", encoding="utf-8") as fh:
        for line in manifest_lines:
            fh.write(json.dumps(line) + "\n")
    print(f"wrote {len(SCENES)} scenes + manifest to {here}")


if __name__ == "__main__":
    main()
