"""Text-to-image evaluation toolkit.

Scores generations by combining a VQA-based text-image alignment (TIA) score
with a no-reference image quality (IQA) score under adjustable convex weights,
and ships the experimental harness (degradation corpora, caption perturbation,
rank-agreement analysis) needed to validate the metric offline.
"""

from .core import (
    AnswerLabel,
    Caption,
    FinalScore,
    IqaScore,
    TiaScore,
    Weights,
    combine,
    normalize_answer,
    score_tia,
)
from .qgen import (
    LLM_PROMPT_TEMPLATE,
    Question,
    QuestionSet,
    QuestionSource,
    build_llm_prompt,
    generate_llm,
    generate_rule_based,
    question_count,
    validate_question_set,
)

__version__ = "0.1.0"

__all__ = [
    "AnswerLabel",
    "Caption",
    "FinalScore",
    "IqaScore",
    "LLM_PROMPT_TEMPLATE",
    "Question",
    "QuestionSet",
    "QuestionSource",
    "TiaScore",
    "Weights",
    "build_llm_prompt",
    "combine",
    "generate_llm",
    "generate_rule_based",
    "normalize_answer",
    "question_count",
    "score_tia",
    "validate_question_set",
]
