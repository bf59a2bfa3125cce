"""Endpoint descriptions and response types shared by all backend clients."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..core import AnswerLabel, normalize_answer


class Role(Enum):
    LLM = "llm"
    VQA = "vqa"
    IQA = "iqa"


@dataclass(frozen=True)
class BackendEndpoint:
    """One external model process reachable over the JSON wire protocol."""

    role: Role
    url: str
    backend_id: str
    timeout: float = 30.0

    def __post_init__(self):
        if not self.backend_id:
            raise ValueError("backend_id must be nonempty")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class VqaResponse:
    """A VQA answer with its normalized label; label always matches raw_answer."""

    raw_answer: str
    label: AnswerLabel
    latency: float
    backend_id: str

    def __post_init__(self):
        if self.label is not normalize_answer(self.raw_answer):
            raise ValueError("label must equal normalize_answer(raw_answer)")

    @classmethod
    def from_raw(cls, raw_answer: str, latency: float, backend_id: str) -> "VqaResponse":
        return cls(
            raw_answer=raw_answer,
            label=normalize_answer(raw_answer),
            latency=latency,
            backend_id=backend_id,
        )
