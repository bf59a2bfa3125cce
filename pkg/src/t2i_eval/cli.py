"""Command-line front end: eval, degrade, qgen, compare.

Config precedence is flags over config file over built-in defaults; the
effective config is echoed into the run log so runs are reproducible. Mock
backends are addressed by mock: URLs (mock:oracle, mock:sidecar,
mock:fixed=<value>) so offline and live runs share one code path.

Exit codes: 0 full success, 2 partial failures or usage errors, 1 fatal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

from . import degrade as deg
from .backends import (
    BackendEndpoint,
    CachedIqa,
    CachedVqa,
    FixedIqa,
    FixedVqa,
    HttpIqa,
    HttpLlm,
    HttpVqa,
    OracleVqa,
    ResponseCache,
    Role,
    SidecarIqa,
    AttributeTable,
)
from .core import Caption, Weights
from .errors import T2iEvalError
from .harness import (
    CaseSpec,
    DatasetRecord,
    EvalConfig,
    ImageRef,
    RankCandidate,
    RankCase,
    emit_report,
    failures,
    ingest_captions,
    load_case_specs,
    rank_agreement,
    run_eval,
)
from .qgen import generate_llm, generate_rule_based

TOKEN_ENV_VAR = "T2I_EVAL_TOKEN"

REPORT_EXTENSIONS = {"jsonl": "jsonl", "csv": "csv", "markdown": "md"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Flat run configuration; same keys in flags and in the config file."""

    dataset: str | None = None
    w_tia: float = 0.5
    w_iqa: float = 0.5
    qgen: str = "rule"
    vqa: str | None = None
    iqa: str | None = None
    llm: str | None = None
    cache_dir: str | None = None
    parallelism: int = 1
    seed: int = 0
    out: str = "out"
    format: str = "jsonl"

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "RunConfig":
        config = cls()
        for key, raw in mapping.items():
            config.apply(key, raw)
        return config

    def apply(self, key: str, raw: str) -> None:
        matching = {f.name: f for f in fields(self)}
        if key not in matching:
            raise UsageError(f"unknown config key {key!r}")
        if key in ("w_tia", "w_iqa"):
            value: object = float(raw)
        elif key in ("parallelism", "seed"):
            value = int(raw)
        else:
            value = raw
        setattr(self, key, value)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat `key = value` lines; '#' starts a comment."""
    mapping = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        mapping[key.strip()] = value.strip()
    return mapping


def effective_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        for key, value in parse_config_file(args.config).items():
            config.apply(key, value)
    for f in fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            setattr(config, f.name, flag_value)
    return config


def parse_weights(config: RunConfig) -> Weights:
    try:
        return Weights(w_tia=config.w_tia, w_iqa=config.w_iqa)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _parse_fixed(spec: str) -> str:
    return spec.split("=", 1)[1]


def make_vqa_source(spec: str, records: list[DatasetRecord], cache: ResponseCache | None,
                    token: str | None):
    if spec == "mock:oracle":
        table = AttributeTable.from_dict({
            r.image_id: r.gt_attributes for r in records if r.gt_attributes is not None
        })
        source = OracleVqa(table)
    elif spec.startswith("mock:fixed="):
        source = FixedVqa(_parse_fixed(spec))
    elif spec.startswith("mock:"):
        raise UsageError(f"unknown VQA mock {spec!r} (use mock:oracle or mock:fixed=<answer>)")
    else:
        endpoint = BackendEndpoint(role=Role.VQA, url=spec, backend_id=spec)
        return HttpVqa(endpoint, cache=cache, token=token)
    return CachedVqa(source, cache) if cache else source


def make_iqa_source(spec: str, cache: ResponseCache | None, token: str | None):
    if spec == "mock:sidecar":
        source = SidecarIqa()
    elif spec.startswith("mock:fixed="):
        try:
            source = FixedIqa(float(_parse_fixed(spec)))
        except ValueError as exc:
            raise UsageError(f"mock:fixed IQA value must be a number: {spec!r}") from exc
    elif spec.startswith("mock:"):
        raise UsageError(f"unknown IQA mock {spec!r} (use mock:sidecar or mock:fixed=<value>)")
    else:
        endpoint = BackendEndpoint(role=Role.IQA, url=spec, backend_id=spec)
        return HttpIqa(endpoint, cache=cache, token=token)
    return CachedIqa(source, cache) if cache else source


def make_llm(spec: str | None, token: str | None):
    if not spec:
        raise UsageError("llm qgen mode needs --llm <url>")
    endpoint = BackendEndpoint(role=Role.LLM, url=spec, backend_id=spec)
    return HttpLlm(endpoint, token=token)


def _write_run_log(path: Path, config: RunConfig, records, started: float) -> None:
    lines = [
        f"started: {time.strftime('%Y-%m-%dT%H:%M:%S%z', time.localtime(started))}",
        f"elapsed_seconds: {time.time() - started:.3f}",
        "",
        "[effective config]",
        config.to_text().rstrip(),
        "",
        "[records]",
    ]
    for record in records:
        vqa_latency = sum(a.latency for a in record.answers)
        status = "ok" if record.ok else f"FAILED: {record.error}"
        lines.append(
            f"{record.image_id}\t{record.caption.id}\tvqa_latency={vqa_latency:.4f}s\t{status}"
        )
    failed = failures(records)
    lines += ["", f"[summary] {len(records) - len(failed)}/{len(records)} records ok"]
    for record in failed:
        lines.append(f"failed: {record.image_id} ({record.caption.id}): {record.error}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_eval(args: argparse.Namespace) -> int:
    started = time.time()
    config = effective_config(args)
    weights = parse_weights(config)
    if not config.dataset:
        raise UsageError("eval needs --dataset")
    if not config.vqa or not config.iqa:
        raise UsageError("eval needs --vqa and --iqa (URLs or mock:...)")
    if config.qgen not in ("rule", "llm"):
        raise UsageError(f"unknown qgen mode {config.qgen!r}")

    ingest = ingest_captions(config.dataset)
    token = os.environ.get(TOKEN_ENV_VAR)
    cache = ResponseCache(config.cache_dir) if config.cache_dir else None
    vqa = make_vqa_source(config.vqa, ingest.records, cache, token)
    iqa = make_iqa_source(config.iqa, cache, token)
    llm = make_llm(config.llm, token) if config.qgen == "llm" else None

    eval_config = EvalConfig(vqa=vqa, iqa=iqa, weights=weights, qgen_mode=config.qgen,
                             llm=llm, parallelism=config.parallelism)
    records = run_eval(ingest.records, eval_config)

    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = emit_report(records, [], config.format,
                         out_dir / f"report.{REPORT_EXTENSIONS[config.format]}")
    _write_run_log(out_dir / "run.log", config, records, started)

    failed = failures(records)
    print(f"evaluated {len(records)} records ({len(failed)} failed, "
          f"{ingest.skipped} skipped at ingest); report: {report}")
    return 2 if failed else 0


def _load_plan(plan_arg: str, seed: int):
    if plan_arg in deg.NAMED_PLANS:
        return deg.NAMED_PLANS[plan_arg](seed)
    if plan_arg.endswith(".json") and Path(plan_arg).exists():
        data = json.loads(Path(plan_arg).read_text(encoding="utf-8"))
        return [
            deg.DegradationSpec(
                kind=deg.DegradationKind(item["kind"]),
                severity_index=int(item["severity_index"]),
                param=float(item["param"]),
                seed=int(item.get("seed", seed)),
            )
            for item in data
        ]
    raise UsageError(
        f"unknown plan {plan_arg!r}; available plans: {', '.join(sorted(deg.NAMED_PLANS))} "
        f"or a path to a JSON plan file"
    )


def cmd_degrade(args: argparse.Namespace) -> int:
    plan = _load_plan(args.plan, args.seed)
    src = Path(args.src)
    if src.is_dir():
        sources = sorted(src.glob("*.png"))
    else:
        sources = [src] if src.exists() else []
    entries = deg.build_degraded_corpus(sources, plan, args.out)
    manifest = Path(args.out) / "manifest.json"
    digest = hashlib.sha256(manifest.read_bytes()).hexdigest()
    print(f"wrote {len(entries)} corpus entries to {args.out}")
    print(f"manifest sha256: {digest}")
    return 0


def cmd_qgen(args: argparse.Namespace) -> int:
    if not args.caption and not args.dataset:
        raise UsageError("qgen needs --caption or --dataset")
    token = os.environ.get(TOKEN_ENV_VAR)
    llm = make_llm(args.llm, token) if args.mode == "llm" else None

    captions: list[Caption] = []
    if args.caption:
        captions.append(Caption.from_text("caption", args.caption))
    if args.dataset:
        captions.extend(r.caption for r in ingest_captions(args.dataset).records)

    for caption in captions:
        if args.mode == "llm":
            question_set = generate_llm(caption, llm)
        else:
            question_set = generate_rule_based(caption)
        if len(captions) > 1:
            print(f"# {caption.id}: {caption.text}")
        for question in question_set.questions:
            print(question.text)
    return 0


class _CompositeBaseline:
    """Numeric metric served over the VQA route: the caption is the question
    and the answer parses as a float (how caption-aware baselines attach)."""

    def __init__(self, name: str, vqa_source):
        self.name = name
        self.vqa = vqa_source

    def score(self, image, caption: Caption) -> float:
        question_like = _CaptionQuestion(caption.text)
        return float(self.vqa.ask(image, question_like).raw_answer)


class _CaptionQuestion:
    """Duck-typed stand-in with just the .text the wire clients read."""

    def __init__(self, text: str):
        self.text = text


class _IqaBaseline:
    def __init__(self, name: str, iqa_source):
        self.name = name
        self.iqa = iqa_source

    def score(self, image, caption: Caption) -> float:
        return self.iqa.score(image).value


def make_baseline(name: str, spec: str, cache: ResponseCache | None, token: str | None):
    if spec.startswith("vqa+"):
        return _CompositeBaseline(name, make_vqa_source(spec[4:], [], cache, token))
    return _IqaBaseline(name, make_iqa_source(spec, cache, token))


def _case_records(case: CaseSpec) -> list[DatasetRecord]:
    records = []
    for cand in case.candidates:
        caption = Caption.from_text(f"{case.case_id}#r{cand.gt_rank}", cand.caption)
        records.append(DatasetRecord(image_id=cand.image_id, image_path=cand.image_path,
                                     caption=caption, gt_attributes=cand.attributes))
    return records


def cmd_compare(args: argparse.Namespace) -> int:
    config = effective_config(args)
    weights = parse_weights(config)
    if not config.vqa or not config.iqa:
        raise UsageError("compare needs --vqa and --iqa for the 'ours' metric")
    case_specs = load_case_specs(args.cases)
    if not case_specs:
        raise UsageError(f"no rank cases in {args.cases}")

    token = os.environ.get(TOKEN_ENV_VAR)
    cache = ResponseCache(config.cache_dir) if config.cache_dir else None

    flat_records: list[DatasetRecord] = []
    boundaries: list[tuple[CaseSpec, int, int]] = []
    for case in case_specs:
        records = _case_records(case)
        boundaries.append((case, len(flat_records), len(flat_records) + len(records)))
        flat_records.extend(records)

    vqa = make_vqa_source(config.vqa, flat_records, cache, token)
    iqa = make_iqa_source(config.iqa, cache, token)
    llm = make_llm(config.llm, token) if config.qgen == "llm" else None
    eval_config = EvalConfig(vqa=vqa, iqa=iqa, weights=weights, qgen_mode=config.qgen,
                             llm=llm, parallelism=config.parallelism)
    evaluated = run_eval(flat_records, eval_config)

    baselines = []
    for item in args.baseline or []:
        if "=" not in item:
            raise UsageError(f"--baseline takes name=<url|mock:...>, got {item!r}")
        name, _, spec = item.partition("=")
        baselines.append(make_baseline(name, spec, cache, token))

    images = {}
    for record, evaluated_record in zip(flat_records, evaluated):
        key = record.image_id
        if key not in images:
            images[key] = ImageRef(record.image_id, record.image_path)
        for baseline in baselines:
            try:
                value = baseline.score(images[key], record.caption)
            except Exception as exc:  # noqa: BLE001 - baseline failures are data
                print(f"baseline {baseline.name} failed on {record.image_id}: {exc}",
                      file=sys.stderr)
                value = float("nan")
            evaluated_record.baselines[baseline.name] = value

    metric_names = ["final", *[b.name for b in baselines]]
    rows = []
    cases = []
    any_invalid = False
    for case, start, end in boundaries:
        case_records = evaluated[start:end]
        if len(case_records) < 2 or any(not r.ok for r in case_records):
            any_invalid = True
            rows.append({"case_id": case.case_id, "axis": case.axis.value,
                         "n": len(case_records), "status": "invalid",
                         **{m: "" for m in metric_names}})
            continue
        rank_case = RankCase(
            case_id=case.case_id,
            axis=case.axis,
            candidates=tuple(
                RankCandidate(gt_rank=spec.gt_rank, record=record)
                for spec, record in zip(case.candidates, case_records)
            ),
        )
        cases.append(rank_case)
        row = {"case_id": case.case_id, "axis": case.axis.value,
               "n": len(case_records), "status": "ok"}
        for metric in metric_names:
            row[metric] = f"{rank_agreement(rank_case, metric).kendall_tau:.4f}"
        rows.append(row)

    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    table_path = out_dir / f"compare.{REPORT_EXTENSIONS[config.format]}"
    _write_compare_table(table_path, rows, metric_names, config.format)
    emit_report(evaluated, cases, "jsonl", out_dir / "compare_details.jsonl")
    print(f"compared {len(case_specs)} cases over metrics: {', '.join(metric_names)}; "
          f"table: {table_path}")
    return 2 if any_invalid else 0


def _write_compare_table(path: Path, rows, metric_names, format: str) -> None:
    header = ["case_id", "axis", "n", "status", *metric_names]
    if format == "jsonl":
        content = "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)
    elif format == "csv":
        lines = [",".join(header)]
        lines += [",".join(str(row[h]) for h in header) for row in rows]
        content = "\n".join(lines) + "\n"
    else:
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(str(row[h]) for h in header) + " |" for row in rows]
        content = "\n".join(lines) + "\n"
    path.write_text(content, encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="t2i-eval",
        description="Score text-to-image generations by combining VQA-based "
                    "text-image alignment with no-reference image quality.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="flat key=value config file")
    shared.add_argument("--w-tia", dest="w_tia", type=float, help="TIA weight (default 0.5)")
    shared.add_argument("--w-iqa", dest="w_iqa", type=float, help="IQA weight (default 0.5)")
    shared.add_argument("--qgen", choices=["rule", "llm"], help="question generation mode")
    shared.add_argument("--vqa", help="VQA backend URL or mock:oracle / mock:fixed=<answer>")
    shared.add_argument("--iqa", help="IQA backend URL or mock:sidecar / mock:fixed=<value>")
    shared.add_argument("--llm", help="LLM backend URL (for --qgen llm)")
    shared.add_argument("--cache-dir", dest="cache_dir", help="response cache directory")
    shared.add_argument("--parallelism", type=int, help="concurrent records (default 1)")
    shared.add_argument("--seed", type=int, help="seed for seeded steps (default 0)")
    shared.add_argument("--out", help="output directory (default ./out)")
    shared.add_argument("--format", choices=["jsonl", "csv", "markdown"],
                        help="report format (default jsonl)")

    p_eval = sub.add_parser("eval", parents=[shared],
                            help="run the metric pipeline over a caption dataset")
    p_eval.add_argument("--dataset", help="caption dataset (.jsonl or .tsv)")
    p_eval.set_defaults(func=cmd_eval)

    p_degrade = sub.add_parser("degrade", help="build a degradation corpus")
    p_degrade.add_argument("--src", required=True, help="source image file or directory of PNGs")
    p_degrade.add_argument("--plan", default="default",
                           help="plan name (default, blur, noise, jpeg) or JSON plan file")
    p_degrade.add_argument("--out", required=True, help="corpus output directory")
    p_degrade.add_argument("--seed", type=int, default=0, help="noise seed")
    p_degrade.set_defaults(func=cmd_degrade)

    p_qgen = sub.add_parser("qgen", help="generate questions for inspection")
    p_qgen.add_argument("--caption", help="caption text")
    p_qgen.add_argument("--dataset", help="caption dataset (.jsonl or .tsv)")
    p_qgen.add_argument("--mode", choices=["rule", "llm"], default="rule")
    p_qgen.add_argument("--llm", help="LLM backend URL (for --mode llm)")
    p_qgen.set_defaults(func=cmd_qgen)

    p_compare = sub.add_parser("compare", parents=[shared],
                               help="rank-agreement comparison across metric sources")
    p_compare.add_argument("--cases", required=True, help="rank-case JSONL file")
    p_compare.add_argument("--baseline", action="append",
                           help="extra metric source as name=<url|mock:...|vqa+url>")
    p_compare.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (T2iEvalError, OSError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
