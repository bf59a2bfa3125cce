"""Domain types and pure scoring arithmetic.

TIA (text-image alignment) is the fraction of yes-expected questions a VQA
backend answered "Yes". IQA is a no-reference image quality score in [0, 1].
The final score is a user-weighted convex combination of the two, so it stays
in [0, 1] and comparable across runs.

Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

logger = logging.getLogger(__name__)

#: Tolerance for the "weights sum to 1" constraint.
WEIGHT_SUM_TOL = 1e-9

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class AnswerLabel(Enum):
    """Binary outcome of one VQA question. Any raw answer maps to exactly one."""

    YES = "yes"
    NO = "no"


@dataclass(frozen=True)
class Caption:
    """An input text/prompt. The word count drives the question-count policy."""

    id: str
    text: str
    word_count: int

    def __post_init__(self):
        words = self.text.split()
        if not words:
            raise ValueError("empty caption")
        if self.word_count != len(words):
            raise ValueError(
                f"word_count {self.word_count} does not match text ({len(words)} words)"
            )

    @classmethod
    def from_text(cls, caption_id: str, text: str) -> "Caption":
        words = text.split()
        if not words:
            raise ValueError("empty caption")
        return cls(id=caption_id, text=text, word_count=len(words))


@dataclass(frozen=True)
class TiaScore:
    """Yes-rate over the question set: value == yes_count / total."""

    yes_count: int
    total: int
    value: float

    def __post_init__(self):
        if self.total < 1:
            raise ValueError("total must be positive")
        if not 0 <= self.yes_count <= self.total:
            raise ValueError(f"yes_count {self.yes_count} out of range for total {self.total}")
        if self.value != self.yes_count / self.total:
            raise ValueError("value must equal yes_count / total")


@dataclass(frozen=True)
class IqaScore:
    """No-reference quality score in [0, 1]; `raw` keeps the backend's number."""

    value: float
    raw: float
    backend_id: str

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"IQA value {self.value} outside [0, 1]")

    @classmethod
    def from_raw(cls, raw: float, backend_id: str) -> "IqaScore":
        """Build a score from a backend-reported value, clamping to [0, 1].

        Backends are required to report in [0, 1]; anything outside is clamped
        and a warning is recorded.
        """
        raw = float(raw)
        value = min(max(raw, 0.0), 1.0)
        if value != raw:
            logger.warning(
                "IQA backend %s reported %s outside [0, 1]; clamped to %s",
                backend_id, raw, value,
            )
        return cls(value=value, raw=raw, backend_id=backend_id)


@dataclass(frozen=True)
class Weights:
    """Convex weights for the final score; defaults give both sides equal say."""

    w_tia: float = 0.5
    w_iqa: float = 0.5

    def __post_init__(self):
        if self.w_tia < 0 or self.w_iqa < 0:
            raise ValueError("weights must be non-negative")
        if abs(self.w_tia + self.w_iqa - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(
                f"weights must sum to 1 (got {self.w_tia} + {self.w_iqa} = "
                f"{self.w_tia + self.w_iqa})"
            )


@dataclass(frozen=True)
class FinalScore:
    """Weighted combination of the two sub-scores, with full provenance."""

    value: float
    tia: TiaScore
    iqa: IqaScore
    weights: Weights

    def __post_init__(self):
        lo = min(self.tia.value, self.iqa.value) - WEIGHT_SUM_TOL
        hi = max(self.tia.value, self.iqa.value) + WEIGHT_SUM_TOL
        if not lo <= self.value <= hi:
            raise ValueError(
                f"final value {self.value} outside the convex range of "
                f"({self.tia.value}, {self.iqa.value})"
            )


def normalize_answer(raw: str) -> AnswerLabel:
    """Map a raw VQA answer string to Yes/No.

    Yes iff the lowercased, punctuation-stripped, whitespace-trimmed answer is
    exactly "yes" or begins with the token "yes". Everything else (hedges,
    empty strings, free text) counts as No: the question protocol constructs
    questions whose correct answer is "Yes", so non-yes is evidence of
    misalignment. Total function, never raises.
    """
    tokens = _TOKEN_RE.findall(raw.lower())
    if tokens and tokens[0] == "yes":
        return AnswerLabel.YES
    return AnswerLabel.NO


def score_tia(answers: Sequence[AnswerLabel]) -> TiaScore:
    """Yes-rate over a nonempty answer vector."""
    if not answers:
        raise ValueError("no questions were asked")
    yes = sum(1 for a in answers if a is AnswerLabel.YES)
    total = len(answers)
    return TiaScore(yes_count=yes, total=total, value=yes / total)


def combine(tia: TiaScore, iqa: IqaScore, weights: Weights | None = None) -> FinalScore:
    """Weighted final score: tia.value * w_tia + iqa.value * w_iqa."""
    w = Weights() if weights is None else weights
    value = tia.value * w.w_tia + iqa.value * w.w_iqa
    return FinalScore(value=value, tia=tia, iqa=iqa, weights=w)
