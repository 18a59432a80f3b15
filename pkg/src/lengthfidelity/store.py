"""Append-only JSONL record store.

Line 1 is a header object (``"type": "header"``) carrying the plan
fingerprint and the tokenization rules version; every following line is one
generation record. Appends are flushed and fsynced one record at a time, so a
crash loses at most the line being written, and a torn final line is ignored
on load.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .metrics import LengthMetrics, length_metrics
from .wordcount import CURRENT_RULES, count_words, get_rules

log = logging.getLogger(__name__)

STORE_FORMAT = "lengthfidelity-store/1"


@dataclass
class GenerationRecord:
    record_id: str
    endpoint_id: str
    variant_id: str
    family: str
    target_words: int
    attempt_index: int
    status: str = "ok"  # "ok" | "failed"
    error_class: str | None = None
    error_message: str | None = None
    raw_response: str | None = None
    final_text: str | None = None
    thinking_text: str | None = None
    parse_method: str | None = None
    unclosed_tag: bool = False
    word_count: int | None = None
    metrics: LengthMetrics | None = None
    latency_ms: float | None = None
    input_tokens: int | None = None
    output_tokens: int | None = None
    tokens_estimated: bool = False
    rules_version: str | None = None
    timestamp: str | None = None

    @property
    def key(self) -> tuple[str, str, int, int]:
        return (self.endpoint_id, self.variant_id, self.target_words, self.attempt_index)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def total_tokens(self) -> int:
        return (self.input_tokens or 0) + (self.output_tokens or 0)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["type"] = "record"
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> GenerationRecord:
        d = {k: v for k, v in d.items() if k != "type"}
        if d.get("metrics") is not None:
            d["metrics"] = LengthMetrics(**d["metrics"])
        return cls(**d)


def record_id(endpoint_id: str, variant_id: str, target_words: int, attempt_index: int) -> str:
    return f"{endpoint_id}:{variant_id}:{target_words}:{attempt_index}"


class StoreError(ValueError):
    pass


@dataclass
class RecordStore:
    path: Path
    header: dict[str, Any]
    records: list[GenerationRecord] = field(default_factory=list)
    torn_tail: bool = False

    def __post_init__(self):
        self._lock = threading.Lock()

    @classmethod
    def create(cls, path: str | Path, header: dict[str, Any]) -> RecordStore:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = {"type": "header", "format": STORE_FORMAT, **header}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_dumps(header) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return cls(path, header)

    @classmethod
    def open(cls, path: str | Path) -> RecordStore:
        path = Path(path)
        header, records, torn = _read(path)
        return cls(path, header, records, torn)

    def append(self, record: GenerationRecord) -> None:
        line = _dumps(record.to_dict()) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self.records.append(record)

    def rewrite(self, records: list[GenerationRecord]) -> None:
        """Atomically replace the file contents with the header plus ``records``."""
        tmp = self.path.with_name(self.path.name + ".tmp")
        with self._lock:
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(_dumps(self.header) + "\n")
                for rec in records:
                    fh.write(_dumps(rec.to_dict()) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
            self.records = list(records)
            self.torn_tail = False


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def _read(path: Path) -> tuple[dict[str, Any], list[GenerationRecord], bool]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise StoreError(f"{path}: empty store (no header)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise StoreError(f"{path}: first line is not a JSON header") from None
    if header.get("type") != "header":
        raise StoreError(f"{path}: first line is not a store header")

    records, torn = [], False
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            if i == len(lines):
                log.warning("%s: ignoring torn final line %d", path, i)
                torn = True
                continue
            raise StoreError(f"{path}:{i}: malformed record line") from None
        try:
            records.append(GenerationRecord.from_dict(obj))
        except TypeError as exc:
            raise StoreError(f"{path}:{i}: bad record: {exc}") from None
    return header, records, torn


def read_store(path: str | Path) -> tuple[dict[str, Any], list[GenerationRecord]]:
    header, records, _ = _read(Path(path))
    return header, records


@dataclass
class AuditResult:
    checked: int
    mismatches: list[str]
    warnings: list[str]
    # records whose count would change under the current rules (older stores only)
    changed_under_current: int = 0

    @property
    def ok(self) -> bool:
        return not self.mismatches


def audit(header: dict[str, Any], records: list[GenerationRecord]) -> AuditResult:
    """Recount every successful record and recompute its metrics.

    Each record is checked under the rules version it was written with. When
    that is older than the current rules, a warning is emitted and the record
    is also recounted under the current rules for comparison.
    """
    mismatches: list[str] = []
    warnings: list[str] = []
    seen: set[tuple] = set()
    changed = 0
    old_versions: set[str] = set()
    checked = 0
    for rec in records:
        if rec.key in seen:
            mismatches.append(f"{rec.record_id}: duplicate cell key")
        seen.add(rec.key)
        if not rec.ok:
            continue
        checked += 1
        version = rec.rules_version or header.get("rules_version") or CURRENT_RULES.version
        try:
            rules = get_rules(version)
        except ValueError:
            mismatches.append(f"{rec.record_id}: unknown rules version {version!r}")
            continue
        text = rec.final_text or ""
        recount = count_words(text, rules)
        if recount != rec.word_count:
            mismatches.append(f"{rec.record_id}: stored word_count={rec.word_count}, recount={recount} ({version})")
            continue
        expected = length_metrics(recount, rec.target_words)
        m = rec.metrics
        if (
            m is None
            or m.generated_words != expected.generated_words
            or m.target_words != expected.target_words
            or m.abs_error != expected.abs_error
            or abs(m.apd - expected.apd) > 1e-12
            or abs(m.ratio - expected.ratio) > 1e-12
        ):
            mismatches.append(f"{rec.record_id}: stored metrics disagree with recount")
        if version != CURRENT_RULES.version:
            old_versions.add(version)
            if count_words(text, CURRENT_RULES) != recount:
                changed += 1
    for v in sorted(old_versions):
        warnings.append(
            f"records written under rules {v}; current rules are {CURRENT_RULES.version} "
            f"({changed} record(s) would count differently)"
        )
    return AuditResult(checked, mismatches, warnings, changed)
