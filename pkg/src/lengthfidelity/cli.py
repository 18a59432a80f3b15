"""Command-line entry point.

Exit codes: 0 success, 1 user error (bad flags, invalid plan, empty store),
2 runtime error (every cell failed, audit mismatch, I/O failure).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import judge as judge_mod
from . import report
from .errors import EmptyStore, IngestError, LengthFidelityError, PlanError, PromptError
from .prompt import Family, TaskKind, TaskSpec, get_variant, load_template_file, render
from .runner import ExperimentPlan, load_plan, resume, run
from .store import StoreError, audit, read_store
from .wordcount import CURRENT_RULES, count_words, get_rules, is_countable, tokenize

EXIT_OK, EXIT_USER, EXIT_RUNTIME = 0, 1, 2


class UserError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _seeded(plan: ExperimentPlan, seed: int | None) -> ExperimentPlan:
    if seed is None:
        return plan
    endpoints = [
        dataclasses.replace(e, mock=dataclasses.replace(e.mock, seed=seed)) if e.mock is not None else e
        for e in plan.endpoints
    ]
    return dataclasses.replace(plan, endpoints=endpoints)


def _store_path(args, plan: ExperimentPlan, plan_path: Path) -> Path:
    if args.output:
        return Path(args.output)
    return plan.output_path or plan_path.parent / "records.jsonl"


# -- subcommands ----------------------------------------------------------------

def cmd_render(args) -> int:
    if args.template_file:
        if not args.family:
            raise UserError("--template-file needs --family (vanilla or thinking)")
        variant = load_template_file(args.template_file, args.family, args.variant, args.task)
    elif args.variant:
        variant = get_variant(args.variant)
    else:
        raise UserError("give --variant or --template-file")
    doc = "(document supplied separately)" if variant.task_kind is TaskKind.SUMMARIZE else None
    rendered = render(variant, TaskSpec(variant.task_kind, args.target, doc))
    sys.stdout.write(rendered.text + "\n")
    return EXIT_OK


def cmd_count(args) -> int:
    rules = get_rules(args.rules_version) if args.rules_version else CURRENT_RULES
    if args.file and args.file != "-":
        text = Path(args.file).read_text(encoding="utf-8")
    else:
        text = sys.stdin.read()
    print(count_words(text, rules))
    if args.tokens:
        for tok in tokenize(text, rules):
            print(f"{tok}\t{'word' if is_countable(tok, rules) else 'punct'}")
    return EXIT_OK


def _do_run(args, resume_mode: bool) -> int:
    plan_path = Path(args.plan)
    plan = _seeded(load_plan(plan_path), args.seed)
    out = _store_path(args, plan, plan_path)
    if resume_mode and out.exists():
        result = resume(plan, out)
    else:
        if out.exists() and not args.force:
            raise UserError(f"{out} already exists; use --resume to continue it or --force to overwrite")
        result = run(plan, out, overwrite=True)
    print(result.summary())
    print(f"store: {result.path}")
    if result.issued and result.completed == 0:
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_run(args) -> int:
    return _do_run(args, args.resume)


def cmd_resume(args) -> int:
    return _do_run(args, True)


def _layout(header: dict) -> tuple[list[str] | None, list[str] | None]:
    plan = header.get("plan") or {}
    rows = [e["id"] for e in plan.get("endpoints", [])] or None
    cols = [v["id"] for v in plan.get("variants", [])] or None
    return rows, cols


def cmd_analyze(args) -> int:
    header, records = read_store(args.store)
    if not any(r.ok for r in records):
        raise EmptyStore(f"{args.store} has no successful records")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ddof = 1 if args.sample_std else 0
    rows, cols = _layout(header)

    table = report.mapd_table(records, rows=rows, columns=cols, ddof=ddof)
    report.export(table, out / "mapd_table.md")
    report.export(table, out / "mapd_table.csv")
    points, overlay = report.fidelity_points(records, ddof=ddof)
    report.export(points, out / "fidelity_points.csv")
    report.export(overlay, out / "fidelity_overlay.csv", "csv")

    improvements = report.improvement_summary(table, records, n_resamples=args.n_resamples, seed=args.seed)
    with open(out / "improvement.txt", "w", encoding="utf-8") as fh:
        for imp in improvements:
            fh.write(imp.line() + "\n")
    with open(out / "significance.jsonl", "w", encoding="utf-8") as fh:
        for imp in improvements:
            if imp.significance is not None:
                fh.write(json.dumps({"endpoint": imp.endpoint_id, "candidate": imp.thinking_variant,
                                     "baseline": imp.vanilla_variant,
                                     **dataclasses.asdict(imp.significance)}, sort_keys=True) + "\n")
    try:
        report.export(report.cost_table(records), out / "cost_table.md")
    except LengthFidelityError as exc:
        print(f"cost table skipped: {exc}", file=sys.stderr)
    meta = {"std": "sample" if ddof else "population", "rules_version": header.get("rules_version"),
            "plan_fingerprint": header.get("plan_fingerprint"), "records": len(records),
            "successful": sum(r.ok for r in records)}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    for row in table.rows:
        best = ", ".join(table.best[row]) or "(no data)"
        print(f"{row}: best {best}")
    for imp in improvements:
        print(imp.line())
    if table.missing:
        print("missing cells: " + ", ".join(f"{r}/{c}" for r, c in table.missing))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_judge(args) -> int:
    plan = load_plan(args.plan)
    if plan.judge is None:
        raise UserError(f"{args.plan} defines no judge endpoint")
    if plan.document is None:
        raise UserError("judging needs the plan's source document")
    _, records = read_store(args.store)
    todo = [r for r in records if r.ok]
    if args.limit:
        todo = todo[: args.limit]
    out = Path(args.out) if args.out else Path(args.store).with_suffix(".judge.jsonl")
    results = judge_mod.judge_records(todo, plan.document, plan.judge, out, max_workers=args.workers)
    flagged = sum(1 for s in results if not s.complete)
    print(f"{len(results)} records judged, {flagged} with missing dimensions")
    print(f"scores: {out}")
    if results and all(not any(v is not None for v in s.scores.values()) for s in results):
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_report(args) -> int:
    header, records = read_store(args.store)
    ddof = 1 if args.sample_std else 0
    if args.kind == "mapd":
        rows, cols = _layout(header)
        obj = report.mapd_table(records, rows=rows, columns=cols, ddof=ddof)
        text = report.render(obj, args.format)
    elif args.kind == "fidelity":
        text = report.render(report.fidelity_points(records, ddof)[0], args.format)
    elif args.kind == "overlay":
        text = report.render(report.fidelity_points(records, ddof)[1], args.format)
    elif args.kind == "cost":
        text = report.render(report.cost_table(records), args.format)
    else:  # quality
        if not args.scores:
            raise UserError("--kind quality needs --scores")
        table = judge_mod.quality_table(judge_mod.read_scores(args.scores), records)
        if args.format != "markdown":
            raise UserError("quality tables export as markdown only")
        text = table.markdown()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_audit(args) -> int:
    header, records = read_store(args.store)
    result = audit(header, records)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for m in result.mismatches:
        print(f"mismatch: {m}")
    print(f"{result.checked} records checked, {len(result.mismatches)} mismatches")
    return EXIT_OK if result.ok else EXIT_RUNTIME


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lengthfidelity", description="Length-fidelity harness for word-count-controlled prompting.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("render", help="print a rendered prompt")
    s.add_argument("--variant", help="built-in variant id (e.g. vanilla-v1, thinking-v2), or a name for --template-file")
    s.add_argument("--target", type=int, required=True, help="target word count")
    s.add_argument("--template-file", help="custom template containing {target_words}")
    s.add_argument("--family", choices=[f.value for f in Family], help="family of the custom template")
    s.add_argument("--task", choices=[k.value for k in TaskKind], default=TaskKind.SUMMARIZE.value,
                   help="task kind of the custom template")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("count", help="count words in a file or standard input")
    s.add_argument("file", nargs="?", help="text file (default: standard input)")
    s.add_argument("--tokens", action="store_true", help="also print every token and whether it counts")
    s.add_argument("--rules-version", help=f"tokenization rules version (default {CURRENT_RULES.version})")
    s.set_defaults(func=cmd_count)

    for name, func, doc in (("run", cmd_run, "run an experiment plan"),
                            ("resume", cmd_resume, "resume an interrupted run")):
        s = sub.add_parser(name, help=doc)
        s.add_argument("--plan", required=True, help="plan file (YAML or JSON)")
        s.add_argument("--output", help="record store path (default: plan's output or records.jsonl)")
        s.add_argument("--seed", type=int, help="override the seed of every mock endpoint")
        if name == "run":
            s.add_argument("--resume", action="store_true", help="continue an existing store")
            s.add_argument("--force", action="store_true", help="overwrite an existing store")
        else:
            s.set_defaults(force=False)
        s.set_defaults(func=func)

    s = sub.add_parser("analyze", help="write MAPD table, fidelity CSVs, improvement and significance")
    s.add_argument("--store", required=True, help="record store (JSONL)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--sample-std", action="store_true", help="sample instead of population std")
    s.add_argument("--seed", type=int, default=0, help="seed for Monte Carlo permutation tests")
    s.add_argument("--n-resamples", type=int, default=10_000, help="Monte Carlo resamples above 12 pairs")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("judge", help="score stored outputs with the plan's judge endpoint")
    s.add_argument("--store", required=True, help="record store (JSONL)")
    s.add_argument("--plan", required=True, help="plan file with a judge endpoint and document")
    s.add_argument("--out", help="scores file (default: <store>.judge.jsonl)")
    s.add_argument("--workers", type=int, default=1, help="concurrent dimension calls per record")
    s.add_argument("--limit", type=int, help="judge at most this many records")
    s.set_defaults(func=cmd_judge)

    s = sub.add_parser("report", help="export one report artifact")
    s.add_argument("--store", required=True, help="record store (JSONL)")
    s.add_argument("--kind", choices=["mapd", "fidelity", "overlay", "cost", "quality"], required=True,
                   help="which artifact")
    s.add_argument("--format", choices=["csv", "markdown", "jsonl"], default="markdown", help="output format")
    s.add_argument("--out", help="output file (default: standard output)")
    s.add_argument("--scores", help="judge scores file, for --kind quality")
    s.add_argument("--sample-std", action="store_true", help="sample instead of population std")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("audit", help="recount every stored record and report mismatches")
    s.add_argument("--store", required=True, help="record store (JSONL)")
    s.set_defaults(func=cmd_audit)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UserError, PlanError, PromptError, IngestError, EmptyStore, StoreError, FileNotFoundError,
            FileExistsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (LengthFidelityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
