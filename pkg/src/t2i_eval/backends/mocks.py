"""Deterministic offline stand-ins for the VQA and IQA backends.

The oracle VQA answers by attribute-set containment against a per-image table
of true phrases, which is what makes ground-truth alignment ranks computable
at desk scale. The sidecar IQA reads degradation metadata written next to the
image, so quality ranks follow degradation severity by construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from ..core import IqaScore
from ..qgen import Question
from .base import VqaResponse

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_RULE_QUESTION_RE = re.compile(r"^does the image (?:also )?show (.*?)\??$")

#: Function words ignored when matching question content against attributes.
STOP_WORDS = frozenset(
    """
    a an the is are was were be been do does did done there this that these
    those it its of in on at by with and or to from has have had image picture
    photo show shows showing also any some
    """.split()
)

ORACLE_BACKEND_ID = "mock:oracle"
SIDECAR_BACKEND_ID = "mock:sidecar"


def normalize_phrase(phrase: str) -> str:
    return " ".join(phrase.lower().split())


@dataclass(frozen=True)
class AttributeTable:
    """Per image id: the set of lowercased attribute phrases true of that image."""

    entries: Mapping[str, frozenset[str]]

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "AttributeTable":
        entries = {}
        for image_id, phrases in data.items():
            normalized = frozenset(normalize_phrase(p) for p in phrases)  # type: ignore[union-attr]
            if any(not p for p in normalized):
                raise ValueError(f"empty attribute phrase for image {image_id!r}")
            entries[image_id] = normalized
        return cls(entries=entries)

    def phrases(self, image_id: str) -> frozenset[str]:
        if image_id not in self.entries:
            raise KeyError(f"unknown image id {image_id!r}")
        return self.entries[image_id]

    def vocabulary(self, image_id: str) -> frozenset[str]:
        """All phrases plus every word of every phrase."""
        words = set()
        for phrase in self.phrases(image_id):
            words.add(phrase)
            words.update(phrase.split())
        return frozenset(words)


def question_span(question_text: str) -> str:
    """The content span of a question.

    Rule-generated questions embed their caption span between "does the image
    show " and the trailing "?"; anything else is taken whole (stop words are
    filtered later either way).
    """
    lowered = question_text.lower().strip().rstrip("?")
    match = _RULE_QUESTION_RE.match(lowered + "?")
    if match:
        return match.group(1)
    return lowered


def oracle_vqa(table: AttributeTable, image_id: str, question: Question) -> VqaResponse:
    """Answer Yes iff every content word of the question's span is a known attribute."""
    vocabulary = table.vocabulary(image_id)
    content = [w for w in _TOKEN_RE.findall(question_span(question.text)) if w not in STOP_WORDS]
    answer = "yes" if all(word in vocabulary for word in content) else "no"
    return VqaResponse.from_raw(answer, 0.0, ORACLE_BACKEND_ID)


def mock_iqa(image_png: bytes | None = None, sidecar: object = None) -> IqaScore:
    """Quality score from degradation metadata: 1 / (1 + severity_index).

    A missing sidecar means a clean image and scores 1.0. The image bytes are
    accepted (to mirror the live signature) but never inspected.
    """
    severity = 0
    if sidecar is not None:
        if isinstance(sidecar, Mapping):
            severity = int(sidecar.get("severity_index", 0))
        else:
            severity = int(getattr(sidecar, "severity_index"))
    value = 1.0 / (1.0 + severity)
    return IqaScore(value=value, raw=value, backend_id=SIDECAR_BACKEND_ID)


class OracleVqa:
    """Harness-facing oracle VQA source; counts calls for cache-transparency tests."""

    def __init__(self, table: AttributeTable):
        self.table = table
        self.backend_id = ORACLE_BACKEND_ID
        self.calls = 0

    def ask(self, image, question: Question) -> VqaResponse:
        self.calls += 1
        return oracle_vqa(self.table, image.image_id, question)


class SidecarIqa:
    """Harness-facing sidecar IQA source."""

    def __init__(self):
        self.backend_id = SIDECAR_BACKEND_ID
        self.calls = 0

    def score(self, image) -> IqaScore:
        self.calls += 1
        return mock_iqa(sidecar=image.sidecar())


class FixedVqa:
    """Always answers with the same raw string."""

    def __init__(self, answer: str):
        self.answer = answer
        self.backend_id = f"mock:fixed={answer}"
        self.calls = 0

    def ask(self, image, question: Question) -> VqaResponse:
        self.calls += 1
        return VqaResponse.from_raw(self.answer, 0.0, self.backend_id)


class FixedIqa:
    """Always reports the same raw score (clamped like a live backend)."""

    def __init__(self, value: float):
        self.value = float(value)
        self.backend_id = f"mock:fixed={value}"
        self.calls = 0

    def score(self, image) -> IqaScore:
        self.calls += 1
        return IqaScore.from_raw(self.value, self.backend_id)
