"""Command-line entry for the adapter."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Sequence

from .config import AdapterConfig
from .runner import run_adapter


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("VLM_ADAPTER_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = argparse.ArgumentParser(
        prog="vlm-adapter",
        description="Score spatial claims with a VLM + detector and emit JSONL records",
    )
    parser.add_argument("--manifest", required=True, help="claims manifest (JSONL)")
    parser.add_argument("--out", required=True, help="output records file")
    parser.add_argument("--vlm", default="toy", help="toy | clip[:model_id] | blip2[:model_id]")
    parser.add_argument("--detector", default="toy", help="toy | HF detector model id")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--detection-threshold", type=float, default=0.3)
    args = parser.parse_args(argv)
    try:
        config = AdapterConfig(
            vlm_model=args.vlm,
            detector_model=args.detector,
            device=args.device,
            detection_threshold=args.detection_threshold,
        )
        emitted = run_adapter(args.manifest, args.out, config)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if emitted > 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
