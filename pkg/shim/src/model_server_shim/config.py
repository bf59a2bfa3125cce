"""Shim configuration: which checkpoints to serve, where, and how hot."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass
class ShimConfig:
    """One config file drives the whole server.

    The model fields are adapter specs, e.g. "hf-vqa:<model-id>",
    "pyiqa:maniqa", "openai:<base-url>|<model>", or "constant:<value>" for
    protocol smoke tests. A role with no spec is disabled; at least one role
    must be enabled.
    """

    host: str = "127.0.0.1"
    port: int = 8008
    vqa_model: str | None = None
    iqa_model: str | None = None
    llm_model: str | None = None
    device: str = "cpu"
    max_concurrent: int = 1

    def __post_init__(self):
        if not (self.vqa_model or self.iqa_model or self.llm_model):
            raise ValueError("at least one role must be enabled")
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")

    @classmethod
    def from_file(cls, path: str | Path) -> "ShimConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("shim config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)
