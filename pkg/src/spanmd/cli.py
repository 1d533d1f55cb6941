"""Command-line entry point.

Wires ingestion -> classification -> queue building -> execution ->
evaluation. Commands: transform, bench, eval, classify, queue, validate,
plus synth for generating benchmark corpora without real arXiv data.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Optional, Sequence

from . import synth
from .config import RunConfig, load_config
from .document import (EditLabel, Page, check_reading_order, ingest_spans,
                       serialize_pages, whitespace_normalize)
from .edit_queue import (EditQueue, Trigger, build_edit_queue, queue_stats,
                         queue_to_jsonable)
from .editability import (ClassifierKind, RemoteClassifier, classify_page,
                          vote_span_labels)
from .errors import SpanmdError, ValidationError
from .executor import (Backbone, ExecConfig, RemoteBackbone, ScriptedBackbone,
                       Transcript, batch_execute, execute)
from .metrics import (PageRun, efficiency_report, format_efficiency_table,
                      format_quality_table, quality_report)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _load_pages(path: str) -> list[Page]:
    pages = ingest_spans(Path(path).read_bytes())
    return sorted(pages, key=lambda p: p.page_id)


def _exec_config(cfg: RunConfig) -> ExecConfig:
    return ExecConfig(max_new_tokens=cfg.max_new_tokens,
                      skip_window_words=cfg.skip_window_words,
                      pad_token=cfg.pad_token)


def _build_backbone(cfg: RunConfig, pages: Sequence[Page]) -> Backbone:
    if cfg.backbone_kind == "remote":
        endpoint = cfg.effective_endpoint()
        if not endpoint:
            raise ValidationError(
                "remote backbone requires an endpoint (config or "
                "SPANMD_BACKBONE_ENDPOINT)", rule="config")
        return RemoteBackbone(endpoint, timeout_s=cfg.timeout_s,
                              retries=cfg.retries)
    if cfg.backbone_script:
        obj = json.loads(Path(cfg.backbone_script).read_text())
        return ScriptedBackbone.from_jsonable(obj)
    missing = [p.page_id for p in pages if p.reference_markdown is None]
    if missing:
        raise ValidationError(
            f"scripted backbone without a script file needs "
            f"reference_markdown on every page; missing: {missing}",
            rule="config")
    return ScriptedBackbone(synth.scripts_from_references(list(pages)))


def _page_labels(pages: Sequence[Page],
                 cfg: RunConfig) -> dict[str, dict[str, EditLabel]]:
    kind = cfg.classifier()
    client = None
    if kind is ClassifierKind.REMOTE:
        if not cfg.classifier_endpoint:
            raise ValidationError("remote classifier requires an endpoint",
                                  rule="config")
        client = RemoteClassifier(cfg.classifier_endpoint,
                                  timeout_s=cfg.timeout_s,
                                  retries=cfg.retries)
    rules = cfg.heuristic_rules()
    out = {}
    for page in pages:
        preds = classify_page(page, kind, rules=rules, client=client)
        out[page.page_id] = vote_span_labels(preds, page)
    return out


def _build_queues(pages: Sequence[Page],
                  labels: Optional[dict[str, dict[str, EditLabel]]],
                  cfg: RunConfig, no_edit: bool) -> list[EditQueue]:
    if no_edit:
        return [EditQueue(page_id=p.page_id, actions=(Trigger(),))
                for p in pages]
    qcfg = cfg.queue_config()
    assert labels is not None
    return [build_edit_queue(p.spans, labels[p.page_id], qcfg,
                             page_id=p.page_id) for p in pages]


def _run(pages: Sequence[Page], queues: Sequence[EditQueue],
         backbone: Backbone, cfg: RunConfig) -> list[Transcript]:
    ecfg = _exec_config(cfg)
    if cfg.batch_size > 1:
        transcripts: list[Transcript] = []
        for i in range(0, len(pages), cfg.batch_size):
            transcripts.extend(batch_execute(
                queues[i:i + cfg.batch_size], pages[i:i + cfg.batch_size],
                backbone, ecfg))
        return transcripts
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(
                lambda qp: execute(qp[0], qp[1], backbone, ecfg),
                zip(queues, pages)))
    return [execute(q, p, backbone, ecfg) for q, p in zip(queues, pages)]


def _transform_once(pages: Sequence[Page], cfg: RunConfig,
                    no_edit: bool) -> list[Transcript]:
    t0 = time.monotonic()
    labels = None if no_edit else _page_labels(pages, cfg)
    classify_s = time.monotonic() - t0
    t0 = time.monotonic()
    queues = _build_queues(pages, labels, cfg, no_edit)
    queue_s = time.monotonic() - t0
    backbone = _build_backbone(cfg, pages)
    transcripts = _run(pages, queues, backbone, cfg)
    for t in transcripts:
        t.timings["classify_s"] = classify_s / len(pages)
        t.timings["queue_build_s"] = queue_s / len(pages)
    return transcripts


def cmd_transform(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    pages = _load_pages(args.spans)
    out_dir = Path(args.out or cfg.out_dir)
    transcripts = _transform_once(pages, cfg, args.no_edit)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for t in transcripts:
        (out_dir / f"{t.page_id}.md").write_text(t.text() + "\n")
        (out_dir / f"{t.page_id}.transcript.json").write_text(
            json.dumps(t.to_jsonable(), ensure_ascii=False, indent=2))
        status = "truncated" if t.truncated else "ok"
        print(f"{t.page_id}: {status} steps={t.generated_steps} "
              f"copied={t.copied_tokens} skips={t.skip_events}")
        if t.truncated:
            failures += 1
    return EXIT_RUNTIME if failures else EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    pages = _load_pages(args.spans)
    missing = [p.page_id for p in pages if p.reference_markdown is None]
    if missing and cfg.backbone_kind == "scripted" and not cfg.backbone_script:
        raise ValidationError(
            f"bench needs reference_markdown on every page; missing: "
            f"{missing}", rule="config")
    runs = {}
    for mode, no_edit in (("baseline", True), ("et", False)):
        transcripts = _transform_once(pages, cfg, no_edit)
        runs[mode] = [
            PageRun(page_id=t.page_id, steps=t.generated_steps,
                    latency_s=sum(t.timings.values()), truncated=t.truncated)
            for t in transcripts]
    report = efficiency_report(runs["baseline"], runs["et"])
    print(format_efficiency_table(report))
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_jsonable(), indent=2))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    pred_dir, ref_dir = Path(args.pred), Path(args.ref)
    preds = {p.stem: p for p in sorted(pred_dir.glob("*.md"))}
    refs = {p.stem: p for p in sorted(ref_dir.glob("*.md"))}
    if set(preds) != set(refs):
        raise ValidationError(
            f"pred/ref page sets differ: {sorted(set(preds) ^ set(refs))}",
            rule="page_set_mismatch")
    if not preds:
        raise ValidationError("no .md files to evaluate", rule="empty_eval")
    pairs = [(preds[k].read_text(), refs[k].read_text())
             for k in sorted(preds)]
    report = quality_report(pairs)
    print(format_quality_table(report))
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_jsonable(), indent=2))
    return EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    pages = _load_pages(args.spans)
    labels = _page_labels(pages, cfg)
    obj = {"pages": {pid: {sid: lab.value for sid, lab in m.items()}
                     for pid, m in labels.items()}}
    text = json.dumps(obj, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def _labels_from_file(path: str) -> dict[str, dict[str, EditLabel]]:
    obj = json.loads(Path(path).read_text())
    return {pid: {sid: EditLabel(v) for sid, v in m.items()}
            for pid, m in obj["pages"].items()}


def cmd_queue(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    pages = _load_pages(args.spans)
    if args.labels:
        labels = _labels_from_file(args.labels)
    else:
        labels = _page_labels(pages, cfg)
    qcfg = cfg.queue_config()
    dumps = []
    for page in pages:
        queue = build_edit_queue(page.spans, labels[page.page_id], qcfg,
                                 page_id=page.page_id)
        entry = queue_to_jsonable(queue)
        entry["stats"] = queue_stats(queue, page.spans, labels[page.page_id])
        dumps.append(entry)
    text = json.dumps(dumps, ensure_ascii=False, indent=2)
    if args.dump or not args.out:
        print(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    pages = _load_pages(args.spans)
    total = 0
    for page in pages:
        anomalies = check_reading_order(page)
        total += len(anomalies)
        flag = "" if not anomalies else f"  {len(anomalies)} order anomalies"
        print(f"{page.page_id}: {len(page.spans)} spans ok{flag}")
        for a in anomalies:
            print(f"  [{a.kind}] {a.detail}")
    print(f"{len(pages)} pages valid, {total} reading-order anomalies")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    if args.kind == "savings":
        pages = synth.savings_corpus(copy_fraction=args.copy_fraction,
                                     pages=args.pages, seed=args.seed)
    else:
        pages = synth.rich_corpus(pages=args.pages, seed=args.seed,
                                  columns=args.columns)
    Path(args.out).write_text(serialize_pages(pages))
    print(f"wrote {len(pages)} pages to {args.out}")
    return EXIT_OK


_CONFIG_FLAGS = (
    ("--classifier-kind", "classifier_kind", str),
    ("--backbone-kind", "backbone_kind", str),
    ("--backbone-endpoint", "backbone_endpoint", str),
    ("--backbone-script", "backbone_script", str),
    ("--classifier-endpoint", "classifier_endpoint", str),
    ("--min-copy-chars", "min_copy_chars", int),
    ("--stop-sign-words", "stop_sign_words", int),
    ("--skip-window-words", "skip_window_words", int),
    ("--max-new-tokens", "max_new_tokens", int),
    ("--pad-token", "pad_token", str),
    ("--batch-size", "batch_size", int),
    ("--workers", "workers", int),
    ("--seed", "seed", int),
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON or TOML config file")
    for flag, dest, typ in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=typ, default=None)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {dest: getattr(args, dest, None)
                 for _, dest, _ in _CONFIG_FLAGS}
    return load_config(getattr(args, "config", None), overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spanmd",
        description="Span-annotated PDF pages to Markdown via edit queues")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="convert a span file to Markdown")
    _add_config_flags(p)
    p.add_argument("--spans", required=True)
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-edit", action="store_true",
                   help="degenerate single-trigger queue (baseline mode)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("bench", help="baseline vs edit-queue step accounting")
    _add_config_flags(p)
    p.add_argument("--spans", required=True)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="quality metrics over .md directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify", help="emit span labels")
    _add_config_flags(p)
    p.add_argument("--spans", required=True)
    p.add_argument("--kind", dest="classifier_kind", default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("queue", help="build and dump edit queues")
    _add_config_flags(p)
    p.add_argument("--spans", required=True)
    p.add_argument("--labels", help="label file from `spanmd classify`")
    p.add_argument("--dump", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_queue)

    p = sub.add_parser("validate", help="validate a span file")
    p.add_argument("--spans", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--kind", choices=("rich", "savings"), default="rich")
    p.add_argument("--pages", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--columns", type=int, default=1)
    p.add_argument("--copy-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SpanmdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
