"""End-to-end orchestration: datasets, caption perturbation, metric runs,
rank agreement against ground-truth orderings, and deterministic reports.

Ground-truth ranks are always inputs fixed by construction (how many words
were swapped, which degradation severity was applied); they are never
inferred from scores.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from .core import (
    AnswerLabel,
    Caption,
    FinalScore,
    IqaScore,
    TiaScore,
    Weights,
    combine,
    score_tia,
)
from .errors import IngestError
from .backends.base import VqaResponse
from .qgen import LlmBackend, Question, QuestionSet, generate_llm, generate_rule_based

logger = logging.getLogger(__name__)


class ImageRef:
    """Lazy handle to an image file plus its optional degradation sidecar."""

    def __init__(self, image_id: str, path: str | Path):
        self.image_id = image_id
        self.path = Path(path)
        self._bytes: bytes | None = None
        self._sidecar: dict | None = None
        self._sidecar_loaded = False

    def png_bytes(self) -> bytes:
        if self._bytes is None:
            self._bytes = self.path.read_bytes()
        return self._bytes

    def sidecar(self) -> dict | None:
        if not self._sidecar_loaded:
            sidecar_path = self.path.with_name(self.path.name + ".json")
            if sidecar_path.exists():
                self._sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
            self._sidecar_loaded = True
        return self._sidecar


class VqaSource(Protocol):
    backend_id: str

    def ask(self, image: ImageRef, question: Question) -> VqaResponse: ...


class IqaSource(Protocol):
    backend_id: str

    def score(self, image: ImageRef) -> IqaScore: ...


@dataclass(frozen=True)
class DatasetRecord:
    image_id: str
    image_path: Path
    caption: Caption
    gt_attributes: frozenset[str] | None = None


@dataclass
class IngestResult:
    records: list[DatasetRecord]
    skipped: int


def _record_from_fields(
    image_id: str,
    image_path: str,
    caption_text: str,
    attributes: Sequence[str] | None,
    base_dir: Path,
    lineno: int,
    path: Path,
) -> DatasetRecord:
    try:
        caption = Caption.from_text(image_id, caption_text)
    except ValueError as exc:
        raise IngestError(f"{path}:{lineno}: {exc}") from exc
    resolved = Path(image_path)
    if not resolved.is_absolute():
        resolved = base_dir / resolved
    attrs = frozenset(a.strip().lower() for a in attributes if a.strip()) if attributes else None
    return DatasetRecord(image_id=image_id, image_path=resolved, caption=caption,
                         gt_attributes=attrs)


def ingest_captions(path: str | Path, format: str | None = None) -> IngestResult:
    """Read a caption dataset; one record per line, input order preserved.

    jsonl lines carry image_id/image_path/caption and an optional attributes
    list; tsv columns come in that order with attributes '|'-separated.
    Records whose image file is missing are skipped (and counted); malformed
    lines raise IngestError naming the line.
    """
    path = Path(path)
    fmt = format or ("tsv" if path.suffix == ".tsv" else "jsonl")
    if fmt not in ("jsonl", "tsv"):
        raise ValueError(f"unknown dataset format {fmt!r}")
    base_dir = path.parent
    records: list[DatasetRecord] = []
    skipped = 0
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        if fmt == "jsonl":
            try:
                data = json.loads(line)
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise IngestError(f"{path}:{lineno}: expected an object")
            missing = [k for k in ("image_id", "image_path", "caption") if k not in data]
            if missing:
                raise IngestError(f"{path}:{lineno}: missing keys {missing}")
            record = _record_from_fields(
                str(data["image_id"]), str(data["image_path"]), str(data["caption"]),
                data.get("attributes"), base_dir, lineno, path,
            )
        else:
            columns = line.split("\t")
            if len(columns) not in (3, 4):
                raise IngestError(
                    f"{path}:{lineno}: expected 3 or 4 tab-separated columns, got {len(columns)}"
                )
            attributes = columns[3].split("|") if len(columns) == 4 else None
            record = _record_from_fields(
                columns[0], columns[1], columns[2], attributes, base_dir, lineno, path
            )
        if not record.image_path.exists():
            logger.warning("%s:%d: image %s missing; record skipped",
                           path, lineno, record.image_path)
            skipped += 1
            continue
        records.append(record)
    return IngestResult(records=records, skipped=skipped)


@dataclass(frozen=True)
class PerturbedCaption:
    """A caption with exactly k words swapped against a replacement map."""

    base: Caption
    text: str
    replaced_positions: tuple[int, ...]
    k: int

    def __post_init__(self):
        base_words = self.base.text.split()
        words = self.text.split()
        if len(words) != len(base_words):
            raise ValueError("perturbation must preserve the word count")
        differing = [i for i, (a, b) in enumerate(zip(base_words, words)) if a != b]
        if differing != sorted(self.replaced_positions) or len(differing) != self.k:
            raise ValueError("replaced_positions must be exactly the differing word positions")

    def as_caption(self, caption_id: str | None = None) -> Caption:
        return Caption.from_text(caption_id or f"{self.base.id}~k{self.k}", self.text)


_WORD_CORE_RE = re.compile(r"^(\W*)(.*?)(\W*)$", re.DOTALL)


def perturb_caption(
    caption: Caption,
    k: int,
    dictionary: Mapping[str, str],
    seed: int,
) -> PerturbedCaption:
    """Deterministically replace k dictionary words; punctuation is preserved."""
    if k < 1:
        raise ValueError("k must be positive")
    words = caption.text.split()
    cores = [_WORD_CORE_RE.match(w).groups() for w in words]  # type: ignore[union-attr]
    candidates = [i for i, (_, core, _) in enumerate(cores) if core.lower() in dictionary]
    if len(candidates) < k:
        raise ValueError(
            f"caption has {len(candidates)} replaceable words, need {k}; "
            f"candidates: {[words[i] for i in candidates]}"
        )
    positions = sorted(random.Random(seed).sample(candidates, k))
    replaced = list(words)
    for i in positions:
        prefix, core, suffix = cores[i]
        replaced[i] = f"{prefix}{dictionary[core.lower()]}{suffix}"
    return PerturbedCaption(
        base=caption, text=" ".join(replaced), replaced_positions=tuple(positions), k=k
    )


def load_perturbation_dictionary(path: str | Path) -> dict[str, str]:
    """JSON object of word -> single-word replacement."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("perturbation dictionary must be a JSON object")
    out = {}
    for word, replacement in data.items():
        if not isinstance(replacement, str) or len(replacement.split()) != 1:
            raise ValueError(f"replacement for {word!r} must be a single word")
        out[word.lower()] = replacement
    return out


@dataclass(frozen=True)
class Answered:
    question: Question
    raw_answer: str
    label: AnswerLabel
    latency: float = 0.0


@dataclass
class EvalRecord:
    """One (image, caption) evaluation with full provenance.

    TIA is recomputable from the stored labels and the final score from the
    stored sub-scores and weights; failed records carry an error instead.
    """

    image_id: str
    caption: Caption
    weights: Weights
    vqa_backend: str
    iqa_backend: str
    question_set: QuestionSet | None = None
    answers: tuple[Answered, ...] = ()
    tia: TiaScore | None = None
    iqa: IqaScore | None = None
    final: FinalScore | None = None
    sidecar: dict | None = None
    baselines: dict[str, float] = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class EvalConfig:
    vqa: VqaSource
    iqa: IqaSource
    weights: Weights = field(default_factory=Weights)
    qgen_mode: str = "rule"
    llm: LlmBackend | None = None
    parallelism: int = 1

    def __post_init__(self):
        if self.qgen_mode not in ("rule", "llm"):
            raise ValueError(f"unknown qgen mode {self.qgen_mode!r}")
        if self.qgen_mode == "llm" and self.llm is None:
            raise ValueError("llm qgen mode needs an LLM backend")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


def _map_ordered(fn: Callable, items: Sequence, parallelism: int) -> list:
    if parallelism <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


def run_eval(records: Sequence[DatasetRecord], config: EvalConfig) -> list[EvalRecord]:
    """Evaluate every record; output order matches input order.

    IQA is queried once per image and shared across caption variants (quality
    does not depend on the text). A backend failure marks that record failed
    without aborting the run.
    """
    images: dict[str, ImageRef] = {}
    for record in records:
        images.setdefault(record.image_id, ImageRef(record.image_id, record.image_path))

    def score_image(image: ImageRef):
        try:
            return config.iqa.score(image)
        except Exception as exc:  # noqa: BLE001 - per-image failures are data
            logger.warning("IQA failed for %s: %s", image.image_id, exc)
            return exc

    unique_images = list(images.values())
    iqa_results = dict(zip(
        (i.image_id for i in unique_images),
        _map_ordered(score_image, unique_images, config.parallelism),
    ))

    def evaluate(record: DatasetRecord) -> EvalRecord:
        image = images[record.image_id]
        out = EvalRecord(
            image_id=record.image_id,
            caption=record.caption,
            weights=config.weights,
            vqa_backend=config.vqa.backend_id,
            iqa_backend=config.iqa.backend_id,
        )
        try:
            out.sidecar = image.sidecar()
            if config.qgen_mode == "rule":
                out.question_set = generate_rule_based(record.caption)
            else:
                out.question_set = generate_llm(record.caption, config.llm)
            answered = []
            for question in out.question_set.questions:
                response = config.vqa.ask(image, question)
                answered.append(
                    Answered(question, response.raw_answer, response.label, response.latency)
                )
            out.answers = tuple(answered)
            iqa = iqa_results[record.image_id]
            if isinstance(iqa, Exception):
                raise iqa
            out.iqa = iqa
            out.tia = score_tia([a.label for a in out.answers])
            out.final = combine(out.tia, out.iqa, config.weights)
        except Exception as exc:  # noqa: BLE001 - per-record failures are data
            out.error = str(exc)
            logger.warning("record %s (%s) failed: %s", record.image_id, record.caption.id, exc)
        return out

    return _map_ordered(evaluate, list(records), config.parallelism)


def failures(records: Sequence[EvalRecord]) -> list[EvalRecord]:
    return [r for r in records if not r.ok]


class RankAxis(Enum):
    TIA = "TIA"
    IQA = "IQA"


@dataclass(frozen=True)
class RankCandidate:
    gt_rank: int
    record: EvalRecord


@dataclass(frozen=True)
class RankCase:
    """Candidates for one image/story with ground-truth ranks fixed by construction."""

    case_id: str
    axis: RankAxis
    candidates: tuple[RankCandidate, ...]

    def __post_init__(self):
        ranks = sorted(c.gt_rank for c in self.candidates)
        if ranks != list(range(1, len(self.candidates) + 1)):
            raise ValueError(f"gt_ranks must be a permutation of 1..n, got {ranks}")

    def ordered(self) -> list[RankCandidate]:
        return sorted(self.candidates, key=lambda c: c.gt_rank)

    def scores(self, metric: str = "final") -> list[float]:
        out = []
        for candidate in self.ordered():
            record = candidate.record
            if metric == "final":
                value = record.final.value if record.final else math.nan
            elif metric == "tia":
                value = record.tia.value if record.tia else math.nan
            elif metric == "iqa":
                value = record.iqa.value if record.iqa else math.nan
            else:
                value = record.baselines.get(metric, math.nan)
            out.append(value)
        return out

    @property
    def complete(self) -> bool:
        return all(c.record.ok for c in self.candidates)


@dataclass(frozen=True)
class RankAgreement:
    kendall_tau: float
    pairwise_agree: float
    strict_monotone: bool


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    """Kendall tau-b with the 0-denominator convention mapped to 0.0."""
    n = len(x)
    concordant = discordant = only_x_tied = only_y_tied = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (x[i] > x[j]) - (x[i] < x[j])
            dy = (y[i] > y[j]) - (y[i] < y[j])
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                only_x_tied += 1
            elif dy == 0:
                only_y_tied += 1
            elif dx == dy:
                concordant += 1
            else:
                discordant += 1
    denom = math.sqrt(
        (concordant + discordant + only_x_tied) * (concordant + discordant + only_y_tied)
    )
    if denom == 0:
        return 0.0
    return (concordant - discordant) / denom


def rank_agreement(case: RankCase, metric: str = "final") -> RankAgreement:
    """Ordinal agreement between a metric's scores and the ground-truth ranks.

    Rank 1 is best and is expected to score highest; tau is computed between
    the scores and the inverse ranks so perfect agreement is +1.
    """
    if len(case.candidates) < 2:
        raise ValueError(f"case {case.case_id} needs at least 2 candidates")
    ordered = case.ordered()
    scores = case.scores(metric)
    inverse_ranks = [-c.gt_rank for c in ordered]
    pairs = agreeing = 0
    for i in range(len(scores)):
        for j in range(i + 1, len(scores)):
            pairs += 1
            ds = (scores[i] > scores[j]) - (scores[i] < scores[j])
            dr = (inverse_ranks[i] > inverse_ranks[j]) - (inverse_ranks[i] < inverse_ranks[j])
            if ds == dr and ds != 0:
                agreeing += 1
    strict = all(scores[i] > scores[i + 1] for i in range(len(scores) - 1))
    return RankAgreement(
        kendall_tau=kendall_tau_b(scores, inverse_ranks),
        pairwise_agree=agreeing / pairs,
        strict_monotone=strict,
    )


def _record_payload(record: EvalRecord) -> dict:
    return {
        "type": "record",
        "image_id": record.image_id,
        "caption_id": record.caption.id,
        "caption": record.caption.text,
        "ok": record.ok,
        "error": record.error,
        "tia": None if record.tia is None else {
            "yes_count": record.tia.yes_count, "total": record.tia.total,
            "value": record.tia.value,
        },
        "iqa": None if record.iqa is None else {
            "value": record.iqa.value, "raw": record.iqa.raw,
            "backend_id": record.iqa.backend_id,
        },
        "final": None if record.final is None else record.final.value,
        "w_tia": record.weights.w_tia,
        "w_iqa": record.weights.w_iqa,
        "vqa_backend": record.vqa_backend,
        "iqa_backend": record.iqa_backend,
        "questions": [
            {"text": a.question.text, "raw_answer": a.raw_answer, "label": a.label.value}
            for a in record.answers
        ],
        "sidecar": record.sidecar,
        "baselines": dict(sorted(record.baselines.items())),
    }


def _case_payload(case: RankCase) -> dict:
    metrics = {}
    if len(case.candidates) >= 2 and case.complete:
        for metric in ("tia", "iqa", "final"):
            agreement = rank_agreement(case, metric)
            metrics[metric] = {
                "kendall_tau": agreement.kendall_tau,
                "pairwise_agree": agreement.pairwise_agree,
                "strict_monotone": agreement.strict_monotone,
            }
    return {
        "type": "case",
        "case_id": case.case_id,
        "axis": case.axis.value,
        "complete": case.complete,
        "candidates": [
            {
                "gt_rank": c.gt_rank,
                "image_id": c.record.image_id,
                "caption_id": c.record.caption.id,
                "tia": None if c.record.tia is None else c.record.tia.value,
                "iqa": None if c.record.iqa is None else c.record.iqa.value,
                "final": None if c.record.final is None else c.record.final.value,
                "baselines": dict(sorted(c.record.baselines.items())),
            }
            for c in case.ordered()
        ],
        "agreement": metrics,
    }


def _baseline_names(records: Sequence[EvalRecord]) -> list[str]:
    names = set()
    for record in records:
        names.update(record.baselines)
    return sorted(names)


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def _render_markdown(records: Sequence[EvalRecord], cases: Sequence[RankCase]) -> str:
    lines: list[str] = ["# Evaluation report", ""]
    if cases:
        for case in sorted(cases, key=lambda c: c.case_id):
            lines.append(f"## Case {case.case_id} ({case.axis.value} axis)"
                         + ("" if case.complete else " — incomplete"))
            lines.append("")
            baselines = _baseline_names([c.record for c in case.candidates])
            header = ["GT rank", "TIA", "IQA", "Final", *baselines]
            lines.append("| " + " | ".join(header) + " |")
            lines.append("|" + "---|" * len(header))
            for candidate in case.ordered():
                record = candidate.record
                row = [
                    str(candidate.gt_rank),
                    _fmt(record.tia.value if record.tia else None),
                    _fmt(record.iqa.value if record.iqa else None),
                    _fmt(record.final.value if record.final else None),
                    *(_fmt(record.baselines.get(b)) for b in baselines),
                ]
                lines.append("| " + " | ".join(row) + " |")
            lines.append("")
    else:
        baselines = _baseline_names(records)
        header = ["Image", "Caption", "TIA", "IQA", "Final", "Status", *baselines]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for record in records:
            row = [
                record.image_id,
                record.caption.text,
                _fmt(record.tia.value if record.tia else None),
                _fmt(record.iqa.value if record.iqa else None),
                _fmt(record.final.value if record.final else None),
                "ok" if record.ok else f"failed: {record.error}",
                *(_fmt(record.baselines.get(b)) for b in baselines),
            ]
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
    return "\n".join(lines)


def _render_csv(records: Sequence[EvalRecord], cases: Sequence[RankCase]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if cases:
        baselines = _baseline_names([c.record for case in cases for c in case.candidates])
        writer.writerow(["case_id", "axis", "gt_rank", "image_id", "caption_id",
                         "tia", "iqa", "final", *baselines])
        for case in sorted(cases, key=lambda c: c.case_id):
            for candidate in case.ordered():
                record = candidate.record
                writer.writerow([
                    case.case_id, case.axis.value, candidate.gt_rank,
                    record.image_id, record.caption.id,
                    _fmt(record.tia.value if record.tia else None),
                    _fmt(record.iqa.value if record.iqa else None),
                    _fmt(record.final.value if record.final else None),
                    *(_fmt(record.baselines.get(b)) for b in baselines),
                ])
    else:
        baselines = _baseline_names(records)
        writer.writerow(["image_id", "caption_id", "caption", "tia", "iqa", "final",
                         "ok", "error", *baselines])
        for record in records:
            writer.writerow([
                record.image_id, record.caption.id, record.caption.text,
                _fmt(record.tia.value if record.tia else None),
                _fmt(record.iqa.value if record.iqa else None),
                _fmt(record.final.value if record.final else None),
                record.ok, record.error or "",
                *(_fmt(record.baselines.get(b)) for b in baselines),
            ])
    return buf.getvalue()


def emit_report(
    records: Sequence[EvalRecord],
    cases: Sequence[RankCase],
    format: str,
    path: str | Path,
) -> Path:
    """Write a deterministic report; rerunning on the same inputs is byte-identical.

    Timestamps live in the separate run log, never in report bodies. jsonl is
    the machine-readable superset (records then cases); csv and markdown are
    table renderings ordered by (case_id, gt_rank).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "jsonl":
        lines = [json.dumps(_record_payload(r), sort_keys=True) for r in records]
        lines += [json.dumps(_case_payload(c), sort_keys=True)
                  for c in sorted(cases, key=lambda c: c.case_id)]
        content = "\n".join(lines) + ("\n" if lines else "")
    elif format == "csv":
        content = _render_csv(records, cases)
    elif format == "markdown":
        content = _render_markdown(records, cases)
    else:
        raise ValueError(f"unknown report format {format!r}")
    path.write_text(content, encoding="utf-8")
    return path


@dataclass(frozen=True)
class CandidateSpec:
    image_id: str
    image_path: Path
    caption: str
    gt_rank: int
    attributes: frozenset[str] | None = None


@dataclass(frozen=True)
class CaseSpec:
    case_id: str
    axis: RankAxis
    candidates: tuple[CandidateSpec, ...]


def load_case_specs(path: str | Path) -> list[CaseSpec]:
    """Rank-case file: one JSON object per line with case_id, axis, candidates."""
    path = Path(path)
    base_dir = path.parent
    cases = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            axis = RankAxis(data["axis"])
            candidates = []
            for cand in data["candidates"]:
                image_path = Path(cand["image_path"])
                if not image_path.is_absolute():
                    image_path = base_dir / image_path
                attrs = cand.get("attributes")
                candidates.append(CandidateSpec(
                    image_id=str(cand["image_id"]),
                    image_path=image_path,
                    caption=str(cand["caption"]),
                    gt_rank=int(cand["gt_rank"]),
                    attributes=frozenset(a.lower() for a in attrs) if attrs else None,
                ))
            cases.append(CaseSpec(case_id=str(data["case_id"]), axis=axis,
                                  candidates=tuple(candidates)))
        except (KeyError, ValueError, TypeError) as exc:
            raise IngestError(f"{path}:{lineno}: bad rank case: {exc}") from exc
    return cases
