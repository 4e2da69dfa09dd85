"""Guideline-driven evolution of reference architecture descriptions."""

from __future__ import annotations

from .model import ArchitectureDescription, content_hash, deserialize, new_description, serialize

__version__ = "0.1.0"

__all__ = ["ArchitectureDescription", "content_hash", "deserialize", "new_description", "serialize", "__version__"]
