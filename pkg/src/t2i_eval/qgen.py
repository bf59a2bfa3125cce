"""Question-count policy and yes-expected question generation.

A caption earns one question if it has 1 or 2 words, then one more question
per started 6-word increment. Questions are produced either by an LLM backend
(constrained prompt, validated output, bounded retries) or by a deterministic
rule-based generator that needs no network at all.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Sequence

from .core import AnswerLabel, Caption
from .errors import LlmOutputError

#: Hard cap on question length; the prompt targets about seven words.
MAX_QUESTION_WORDS = 12

#: Retries after the first attempt when LLM output fails validation.
DEFAULT_LLM_RETRIES = 2

LLM_PROMPT_TEMPLATE = (
    "You will be given an image description. Write exactly {n} questions about "
    "an image that matches this description. Each question must be a simple "
    'sentence of about seven words. Each question must be answerable with "Yes" '
    "for an image that matches the description. Output one question per line "
    "with no numbering. Description: {caption}"
)


class QuestionSource(Enum):
    LLM = "llm"
    RULE = "rule"


class LlmBackend(Protocol):
    """Anything that turns a prompt into raw text (HTTP client, test stub)."""

    def generate(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class Question:
    """A single yes-expected question about an image."""

    text: str
    source: QuestionSource
    word_count: int
    expected_answer: AnswerLabel = AnswerLabel.YES

    def __post_init__(self):
        if self.expected_answer is not AnswerLabel.YES:
            raise ValueError("questions are constructed so the answer is Yes")
        if not self.text.endswith("?") or "\n" in self.text:
            raise ValueError(f"question must be a single line ending in '?': {self.text!r}")
        if self.word_count != len(self.text.split()) or self.word_count < 1:
            raise ValueError("word_count must match the question text")
        if self.source is QuestionSource.RULE and self.word_count > MAX_QUESTION_WORDS:
            raise ValueError(f"rule-based question exceeds {MAX_QUESTION_WORDS} words")

    @classmethod
    def make(cls, text: str, source: QuestionSource) -> "Question":
        return cls(text=text, source=source, word_count=len(text.split()))


@dataclass(frozen=True)
class QuestionSet:
    """Questions bound to one caption.

    Sets returned by the generators always satisfy: exactly `policy_count`
    questions, no duplicate texts. The container itself stays permissive so
    that nonconforming LLM output can be inspected via `validate_question_set`.
    """

    caption_id: str
    questions: tuple[Question, ...]
    policy_count: int


def question_count(word_count: int) -> int:
    """How many questions a caption of `word_count` words earns.

    1 for one- or two-word captions; beyond two words, one additional question
    per started 6-word increment. Monotone non-decreasing.
    """
    if word_count == 0:
        raise ValueError("empty caption")
    if word_count < 0:
        raise ValueError(f"word_count must be positive, got {word_count}")
    if word_count <= 2:
        return 1
    # 1 + ceil((word_count - 2) / 6), in integer arithmetic
    return 1 + (word_count + 3) // 6


def build_llm_prompt(caption: Caption, n: int) -> str:
    """Interpolate the instruction template for `caption` and `n` questions."""
    expected = question_count(caption.word_count)
    if n != expected:
        raise ValueError(f"n must equal question_count({caption.word_count}) = {expected}")
    return LLM_PROMPT_TEMPLATE.format(n=n, caption=caption.text)


def _span_sizes(total: int, n: int) -> list[int]:
    base, rem = divmod(total, n)
    return [base + 1] * rem + [base] * (n - rem)


def _spans(words: Sequence[str], n: int) -> list[list[str]]:
    """Split words into n contiguous near-equal spans; earlier spans take the remainder."""
    spans = []
    start = 0
    for size in _span_sizes(len(words), n):
        spans.append(list(words[start:start + size]))
        start += size
    return spans


def generate_rule_based(caption: Caption) -> QuestionSet:
    """Deterministic offline question generation.

    The caption is split into `question_count` contiguous word spans; each
    span S (lowercased, terminal punctuation stripped) becomes the question
    "Does the image show S?". Identical spans are disambiguated with extra
    trailing question marks so sets never contain duplicate texts. Stable
    across runs and platforms.
    """
    n = question_count(caption.word_count)
    texts: list[str] = []
    for span in _spans(caption.text.split(), n):
        phrase = " ".join(w.lower() for w in span).rstrip(string.punctuation).strip()
        text = f"Does the image show {phrase}?"
        while text in texts:
            text += "?"
        texts.append(text)
    questions = tuple(Question.make(t, QuestionSource.RULE) for t in texts)
    return QuestionSet(caption_id=caption.id, questions=questions, policy_count=n)


def validate_question_texts(lines: Sequence[str], expected_n: int) -> list[str]:
    """Check raw question lines against the generation constraints.

    Returns a list of violation messages; empty means conforming.
    """
    violations = []
    if len(lines) != expected_n:
        violations.append(f"count mismatch: expected {expected_n} questions, got {len(lines)}")
    seen = set()
    for line in lines:
        if not line.strip():
            violations.append("empty line")
            continue
        if line in seen:
            violations.append(f"duplicate question: {line!r}")
        seen.add(line)
        if not line.endswith("?"):
            violations.append(f"missing '?': {line!r}")
        if len(line.split()) > MAX_QUESTION_WORDS:
            violations.append(f"word count > {MAX_QUESTION_WORDS}: {line!r}")
    return violations


def validate_question_set(qs: QuestionSet, caption: Caption) -> list[str]:
    """Validate a question set against its caption's policy; [] means conforming."""
    violations = validate_question_texts([q.text for q in qs.questions], qs.policy_count)
    expected = question_count(caption.word_count)
    if qs.policy_count != expected:
        violations.append(
            f"policy_count {qs.policy_count} does not match question_count({caption.word_count}) = {expected}"
        )
    return violations


def generate_llm(
    caption: Caption,
    llm: LlmBackend,
    retries: int = DEFAULT_LLM_RETRIES,
) -> QuestionSet:
    """Generate questions through an LLM backend, validating its output.

    Sends the interpolated prompt, parses one question per nonempty response
    line, and retries (up to `retries` extra attempts) while the output
    violates the constraints. Raises LlmOutputError, carrying the last raw
    response, if the output still does not conform.
    """
    n = question_count(caption.word_count)
    prompt = build_llm_prompt(caption, n)
    raw = ""
    violations: list[str] = []
    for _ in range(retries + 1):
        raw = llm.generate(prompt)
        lines = [line.strip() for line in raw.splitlines() if line.strip()]
        violations = validate_question_texts(lines, n)
        if not violations:
            questions = tuple(Question.make(line, QuestionSource.LLM) for line in lines)
            return QuestionSet(caption_id=caption.id, questions=questions, policy_count=n)
    raise LlmOutputError(
        f"llm output nonconforming after {retries + 1} attempts: {'; '.join(violations)}",
        raw_response=raw,
    )
