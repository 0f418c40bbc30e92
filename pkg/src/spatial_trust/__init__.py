"""Confidence estimation for VLM spatial predictions.

Validates a vision-language model's spatial claims against object-detection
geometry, fuses four confidence signals with gradient-boosted trees, and
supports selective prediction and confidence-pruned scene graphs.
"""

from . import evalkit, gbdt, geometry, records, scenegraph, synthgen

__all__ = ["evalkit", "gbdt", "geometry", "records", "scenegraph", "synthgen"]

__version__ = "0.1.0"
