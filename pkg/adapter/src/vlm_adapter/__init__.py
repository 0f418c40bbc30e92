"""Bridge from VSR-style spatial claims to spatial-trust JSONL records."""

from .config import AdapterConfig
from .runner import run_adapter

__all__ = ["AdapterConfig", "run_adapter"]

__version__ = "0.1.0"
