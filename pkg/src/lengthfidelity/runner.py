"""Experiment grid orchestration: expand, run, resume.

A plan is the cartesian product endpoints x variants x targets x attempts.
Each cell runs render -> generate -> parse -> strip scaffold -> count ->
metrics and is appended to the record store before that worker moves on.
Cell failures are recorded, not raised; a failed cell keeps its attempt slot
and is only retried by :func:`resume`.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, NamedTuple

import yaml

from . import client as client_mod
from .client import ModelEndpoint, ModelResponse, endpoint_from_config
from .errors import EmptyAxis, PlanError, PlanMismatch
from .ingest import Attachment, SourceDocument, load_attachment, load_document
from .metrics import length_metrics
from .parse import parse_response
from .prompt import PromptVariant, TaskKind, TaskSpec, get_variant, load_template_file, render
from .store import GenerationRecord, RecordStore, record_id
from .wordcount import CURRENT_RULES, count_words

log = logging.getLogger(__name__)

DEFAULT_TARGETS = (20, 50, 100, 200, 500, 1000, 2000, 5000)
DEFAULT_ATTEMPTS = 5
DEFAULT_DELAY_MS = 1000.0


class Cell(NamedTuple):
    endpoint_id: str
    variant_id: str
    target_words: int
    attempt_index: int


@dataclass
class ExperimentPlan:
    endpoints: Sequence[ModelEndpoint]
    variants: Sequence[PromptVariant]
    targets: Sequence[int] = DEFAULT_TARGETS
    attempts: int = DEFAULT_ATTEMPTS
    task_kind: TaskKind = TaskKind.SUMMARIZE
    document: SourceDocument | Attachment | str | None = None
    inter_attempt_delay_ms: float = DEFAULT_DELAY_MS
    concurrency_limit: int = 1
    output_path: Path | None = None
    judge: ModelEndpoint | None = None

    def __post_init__(self):
        self.task_kind = TaskKind(self.task_kind)
        self.endpoints = list(self.endpoints)
        self.variants = list(self.variants)
        self.targets = list(self.targets)
        if self.output_path is not None:
            self.output_path = Path(self.output_path)
        self.validate()

    def validate(self) -> None:
        for name in ("endpoints", "variants", "targets"):
            if not getattr(self, name):
                raise EmptyAxis(f"plan has no {name}")
        if not isinstance(self.attempts, int) or self.attempts < 1:
            raise EmptyAxis(f"attempts must be >= 1, got {self.attempts!r}")
        ids = [e.id for e in self.endpoints]
        if len(set(ids)) != len(ids):
            raise PlanError(f"duplicate endpoint ids: {ids}")
        keys = [v.key for v in self.variants]
        if len(set(keys)) != len(keys):
            raise PlanError(f"duplicate variants: {keys}")
        for t in self.targets:
            if isinstance(t, bool) or not isinstance(t, int) or t < 1:
                raise PlanError(f"targets must be positive integers, got {t!r}")
        if len(set(self.targets)) != len(self.targets):
            raise PlanError(f"duplicate targets: {self.targets}")
        for v in self.variants:
            if v.task_kind is not self.task_kind:
                raise PlanError(f"variant {v.key!r} is for {v.task_kind.value} tasks, plan is {self.task_kind.value}")
        if self.task_kind is TaskKind.SUMMARIZE and not self.document:
            raise PlanError("summarize plans need a document")
        if self.task_kind is TaskKind.STORY and self.document:
            raise PlanError("story plans take no document")
        if self.concurrency_limit < 1:
            raise PlanError("concurrency_limit must be >= 1")
        if self.inter_attempt_delay_ms < 0:
            raise PlanError("inter_attempt_delay_ms must be >= 0")

    @property
    def cell_count(self) -> int:
        return len(self.endpoints) * len(self.variants) * len(self.targets) * self.attempts

    def endpoint(self, endpoint_id: str) -> ModelEndpoint:
        return next(e for e in self.endpoints if e.id == endpoint_id)

    def variant(self, key: str) -> PromptVariant:
        return next(v for v in self.variants if v.key == key)

    def fingerprint(self) -> str:
        """Hash of the grid axes. Pacing and concurrency are excluded so they can change on resume."""
        axes = {
            "task_kind": self.task_kind.value,
            "endpoints": [e.id for e in self.endpoints],
            "variants": [
                [v.key, v.family.value, hashlib.sha256(v.template.encode()).hexdigest()]
                for v in self.variants
            ],
            "targets": list(self.targets),
            "attempts": self.attempts,
        }
        blob = json.dumps(axes, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def header(self) -> dict[str, Any]:
        doc = self.document
        doc_info = None
        if isinstance(doc, SourceDocument):
            doc_info = {"path": doc.path, "word_count": doc.word_count,
                        "sha256": hashlib.sha256(doc.text.encode()).hexdigest()}
        elif isinstance(doc, Attachment):
            doc_info = {"path": doc.path, "mime_type": doc.mime_type,
                        "sha256": hashlib.sha256(doc.data).hexdigest()}
        elif isinstance(doc, str):
            doc_info = {"sha256": hashlib.sha256(doc.encode()).hexdigest()}
        return {
            "plan_fingerprint": self.fingerprint(),
            "rules_version": CURRENT_RULES.version,
            "created": _now(),
            "plan": {
                "task_kind": self.task_kind.value,
                "endpoints": [e.to_config() for e in self.endpoints],
                "variants": [{"id": v.key, "family": v.family.value} for v in self.variants],
                "targets": list(self.targets),
                "attempts": self.attempts,
                "inter_attempt_delay_ms": self.inter_attempt_delay_ms,
                "concurrency_limit": self.concurrency_limit,
                "document": doc_info,
            },
        }


def expand(plan: ExperimentPlan) -> list[Cell]:
    """All cells in (endpoint, variant, target, attempt) order."""
    plan.validate()
    return [
        Cell(e.id, v.key, t, a)
        for e in plan.endpoints
        for v in plan.variants
        for t in plan.targets
        for a in range(plan.attempts)
    ]


GenerateFn = Callable[..., ModelResponse]


@dataclass
class RunResult:
    path: Path
    records: list[GenerationRecord]
    issued: int
    completed: int
    failed: int
    skipped: int = 0
    new_records: list[GenerationRecord] = field(default_factory=list)

    def summary(self) -> str:
        if self.issued == 0:
            return "0 completed (nothing to do)"
        return f"{self.completed} completed, {self.failed} failed"


class _Pacer:
    """Spaces calls to one endpoint by at least ``delay_s`` after the previous one finished."""

    def __init__(self, delay_s: float):
        self.delay_s = delay_s
        self._lock = threading.Lock()
        self._ready_at = 0.0
        self._first = True

    def wait(self) -> None:
        with self._lock:
            if not self._first:
                pause = self._ready_at - time.monotonic()
                if pause > 0:
                    time.sleep(pause)
            self._first = False

    def done(self) -> None:
        with self._lock:
            self._ready_at = max(self._ready_at, time.monotonic() + self.delay_s)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def run_cell(
    plan: ExperimentPlan, cell: Cell, generate_fn: GenerateFn = client_mod.generate
) -> GenerationRecord:
    """Execute one cell and return its record; never raises for cell-level failures."""
    variant = plan.variant(cell.variant_id)
    endpoint = plan.endpoint(cell.endpoint_id)
    rec = GenerationRecord(
        record_id=record_id(*cell),
        endpoint_id=cell.endpoint_id,
        variant_id=cell.variant_id,
        family=variant.family.value,
        target_words=cell.target_words,
        attempt_index=cell.attempt_index,
        rules_version=CURRENT_RULES.version,
    )
    try:
        task = TaskSpec(
            plan.task_kind, cell.target_words,
            plan.document if plan.task_kind is TaskKind.SUMMARIZE else None,
        )
        rendered = render(variant, task)
        resp = generate_fn(endpoint, rendered, task.document)
        rec.raw_response = resp.text
        rec.latency_ms = resp.latency_ms
        rec.input_tokens = resp.input_tokens
        rec.output_tokens = resp.output_tokens
        rec.tokens_estimated = resp.tokens_estimated
        parsed = parse_response(resp.text, variant.family, variant.key)
        rec.final_text = parsed.final_text
        rec.thinking_text = parsed.thinking_text
        rec.parse_method = parsed.parse_method.value
        rec.unclosed_tag = parsed.unclosed_tag
        rec.word_count = count_words(parsed.final_text, CURRENT_RULES)
        rec.metrics = length_metrics(rec.word_count, cell.target_words)
    except Exception as exc:  # fail-soft: the error class is the record's payload
        rec.status = "failed"
        rec.error_class = type(exc).__name__
        rec.error_message = str(exc)[:1000]
        log.warning("cell %s failed: %s: %s", rec.record_id, rec.error_class, exc)
    rec.timestamp = _now()
    return rec


def _execute(
    plan: ExperimentPlan, store: RecordStore, cells: list[Cell], generate_fn: GenerateFn
) -> list[GenerationRecord]:
    by_endpoint: dict[str, list[Cell]] = {}
    for c in cells:
        by_endpoint.setdefault(c.endpoint_id, []).append(c)
    pacers = {eid: _Pacer(plan.inter_attempt_delay_ms / 1000.0) for eid in by_endpoint}
    new: list[GenerationRecord] = []
    new_lock = threading.Lock()

    def work(cell: Cell) -> None:
        pacer = pacers[cell.endpoint_id]
        pacer.wait()
        try:
            rec = run_cell(plan, cell, generate_fn)
        finally:
            pacer.done()
        store.append(rec)
        with new_lock:
            new.append(rec)

    if plan.concurrency_limit == 1 and len(by_endpoint) == 1:
        for c in cells:
            work(c)
        return new

    pools = {eid: ThreadPoolExecutor(plan.concurrency_limit, thread_name_prefix=f"lf-{eid}")
             for eid in by_endpoint}
    try:
        futures = [pools[c.endpoint_id].submit(work, c) for c in cells]
        for f in futures:
            f.result()
    finally:
        for p in pools.values():
            p.shutdown(wait=True)
    return new


def run(
    plan: ExperimentPlan,
    output_path: str | Path | None = None,
    *,
    generate_fn: GenerateFn = client_mod.generate,
    overwrite: bool = False,
) -> RunResult:
    """Run every cell of ``plan`` into a fresh store at ``output_path``."""
    path = Path(output_path or plan.output_path or "records.jsonl")
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists; resume it or pass overwrite=True")
    cells = expand(plan)
    store = RecordStore.create(path, plan.header())
    new = _execute(plan, store, cells, generate_fn)
    ok = sum(r.ok for r in new)
    return RunResult(path, store.records, len(new), ok, len(new) - ok, 0, new)


def resume(
    plan: ExperimentPlan,
    output_path: str | Path | None = None,
    *,
    generate_fn: GenerateFn = client_mod.generate,
) -> RunResult:
    """Run only the cells that lack a successful record in an existing store.

    Failed records and a torn final line are dropped (atomic rewrite) before
    new records are appended, so each cell key appears at most once.
    """
    path = Path(output_path or plan.output_path or "records.jsonl")
    store = RecordStore.open(path)
    found = store.header.get("plan_fingerprint")
    if found != plan.fingerprint():
        raise PlanMismatch(f"{path} was written by a different plan (fingerprint {str(found)[:12]}...)")

    keep: dict[tuple, GenerationRecord] = {}
    for rec in store.records:
        if rec.ok and rec.key not in keep:
            keep[rec.key] = rec
    if store.torn_tail or len(keep) != len(store.records):
        store.rewrite(list(keep.values()))

    pending = [c for c in expand(plan) if tuple(c) not in keep]
    new = _execute(plan, store, pending, generate_fn) if pending else []
    ok = sum(r.ok for r in new)
    return RunResult(path, store.records, len(new), ok, len(new) - ok, len(keep), new)


# -- plan files --------------------------------------------------------------

_PLAN_KEYS = {
    "task", "document", "attachment", "targets", "attempts", "variants", "endpoints",
    "inter_attempt_delay_ms", "concurrency_limit", "output", "judge",
}


def _variant_from_config(item: Any, base: Path) -> PromptVariant:
    if isinstance(item, str):
        return get_variant(item)
    if isinstance(item, dict) and "template_file" in item:
        try:
            return load_template_file(
                base / item["template_file"], item["family"], item.get("name"),
                item.get("task", TaskKind.SUMMARIZE),
            )
        except KeyError as exc:
            raise PlanError(f"custom variant needs {exc}") from None
    raise PlanError(f"bad variant entry: {item!r}")


def plan_from_config(cfg: dict[str, Any], base_dir: str | Path = ".") -> ExperimentPlan:
    """Build a plan from a parsed plan file; relative paths resolve against ``base_dir``."""
    base = Path(base_dir)
    if not isinstance(cfg, dict):
        raise PlanError("plan file must hold a mapping")
    unknown = set(cfg) - _PLAN_KEYS
    if unknown:
        raise PlanError(f"unknown plan keys: {sorted(unknown)}")
    try:
        kind = TaskKind(cfg.get("task", TaskKind.SUMMARIZE))
    except ValueError:
        raise PlanError(f"unknown task {cfg.get('task')!r}") from None

    document = None
    if cfg.get("document") and cfg.get("attachment"):
        raise PlanError("give either document or attachment, not both")
    if cfg.get("document"):
        document = load_document(base / cfg["document"])
    elif cfg.get("attachment"):
        document = load_attachment(base / cfg["attachment"])

    endpoints = [endpoint_from_config(e) for e in cfg.get("endpoints") or []]
    variants = [_variant_from_config(v, base) for v in cfg.get("variants") or []]
    judge = None
    if cfg.get("judge"):
        judge = endpoint_from_config({"temperature": 0.0, **cfg["judge"]})
    output = cfg.get("output")
    try:
        return ExperimentPlan(
            endpoints=endpoints,
            variants=variants,
            targets=cfg.get("targets", DEFAULT_TARGETS),
            attempts=cfg.get("attempts", DEFAULT_ATTEMPTS),
            task_kind=kind,
            document=document,
            inter_attempt_delay_ms=float(cfg.get("inter_attempt_delay_ms", DEFAULT_DELAY_MS)),
            concurrency_limit=int(cfg.get("concurrency_limit", 1)),
            output_path=(base / output) if output else None,
            judge=judge,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, PlanError):
            raise
        raise PlanError(str(exc)) from None


def load_plan(path: str | Path) -> ExperimentPlan:
    """Read a YAML (or JSON) plan file."""
    path = Path(path)
    try:
        cfg = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise PlanError(f"plan file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise PlanError(f"{path}: not valid YAML/JSON: {exc}") from None
    return plan_from_config(cfg, path.parent)
