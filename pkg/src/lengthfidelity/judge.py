"""LLM-as-a-judge quality scoring on four rubric dimensions.

Each dimension is scored by a separate judge call that must answer with
``{"score": <0..1>, "rationale": "..."}``. Out-of-range scores are rejected
rather than clamped. A failure on one dimension is recorded and the other
dimensions still run.
"""

from __future__ import annotations

import enum
import json
import math
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import client as client_mod
from .client import ModelEndpoint
from .errors import JudgeError, NoScoreFound, ScoreOutOfRange, UnknownDimension
from .ingest import SourceDocument
from .prompt import VariantId
from .store import GenerationRecord


class Dimension(str, enum.Enum):
    CORRECTNESS = "correctness"
    COMPLETENESS = "completeness"
    FAITHFULNESS = "faithfulness"
    RELEVANCE = "relevance"


DEFINITIONS = {
    Dimension.CORRECTNESS: (
        "Measures the factual accuracy of information presented in the summary relative to "
        "the source document, evaluating whether statements accurately reflect information "
        "from the original text."
    ),
    Dimension.COMPLETENESS: (
        "Assesses whether the summary captures all essential information from the original "
        "document proportionate to its length target, including key points, arguments, and "
        "conclusions."
    ),
    Dimension.FAITHFULNESS: (
        "Evaluates whether the summary contains information that is consistent with the source "
        "document without introducing facts or claims not present in the original."
    ),
    Dimension.RELEVANCE: (
        "Measures how well the summary focuses on information that matters to the core message "
        "of the document, avoiding tangential details while highlighting central themes."
    ),
}

# column order of the published quality table
TABLE_ORDER = (Dimension.CORRECTNESS, Dimension.FAITHFULNESS, Dimension.COMPLETENESS, Dimension.RELEVANCE)

_PROMPT = """\
You are an impartial evaluator. Score the summary below against its source document on a single quality dimension.

Dimension: {name}
Definition: {definition}

<document>
{document}
</document>

<summary>
{summary}
</summary>

Score from 0 (worst) to 1 (best) on this dimension only.
Respond with exactly one JSON object and nothing else:
{{"score": <number between 0 and 1>, "rationale": "<one or two sentences>"}}"""


def _dimension(dim: Dimension | str) -> Dimension:
    try:
        return Dimension(str(dim.value if isinstance(dim, Dimension) else dim).lower())
    except ValueError:
        raise UnknownDimension(f"unknown dimension {dim!r}; known: {[d.value for d in Dimension]}") from None


def build_judge_prompt(dimension: Dimension | str, document: str, summary: str) -> str:
    dim = _dimension(dimension)
    if not document or not document.strip():
        raise JudgeError("document is empty")
    if not summary or not summary.strip():
        raise JudgeError("summary is empty")
    return _PROMPT.format(name=dim.value.capitalize(), definition=DEFINITIONS[dim],
                          document=document.strip(), summary=summary.strip())


_decoder = json.JSONDecoder()


def parse_judge_response(raw: str) -> float:
    """Score from the first JSON object in ``raw`` that has a ``score`` key."""
    raw = raw or ""
    pos = raw.find("{")
    while pos != -1:
        try:
            obj, _ = _decoder.raw_decode(raw, pos)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict) and "score" in obj:
            return _check_score(obj["score"])
        pos = raw.find("{", pos + 1)
    raise NoScoreFound(f"no JSON object with a score in judge output: {raw[:120]!r}")


def _check_score(value: Any) -> float:
    if isinstance(value, bool):
        raise NoScoreFound(f"score is not numeric: {value!r}")
    try:
        score = float(value)
    except (TypeError, ValueError):
        raise NoScoreFound(f"score is not numeric: {value!r}") from None
    if math.isnan(score) or not 0.0 <= score <= 1.0:
        raise ScoreOutOfRange(f"score {score} outside [0, 1]")
    return score


@dataclass
class QualityScores:
    record_id: str
    judge_model_id: str
    scores: dict[str, float | None] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    raw: dict[str, str] = field(default_factory=dict)

    def __getattr__(self, name: str) -> float | None:
        if name in Dimension._value2member_map_:
            return self.scores.get(name)
        raise AttributeError(name)

    @property
    def complete(self) -> bool:
        return all(self.scores.get(d.value) is not None for d in Dimension)

    def to_dict(self) -> dict[str, Any]:
        return {"record_id": self.record_id, "judge_model_id": self.judge_model_id,
                "scores": self.scores, "errors": self.errors, "raw": self.raw}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> QualityScores:
        return cls(d["record_id"], d["judge_model_id"], dict(d.get("scores") or {}),
                   dict(d.get("errors") or {}), dict(d.get("raw") or {}))


def _document_text(document: SourceDocument | str) -> str:
    if isinstance(document, SourceDocument):
        return document.text
    if isinstance(document, str):
        return document
    raise JudgeError("the judge needs the source document as text")


def evaluate_quality(
    record: GenerationRecord,
    document: SourceDocument | str,
    judge: ModelEndpoint,
    *,
    generate_fn=client_mod.generate,
    max_workers: int = 1,
) -> QualityScores:
    """Score one record on all four dimensions with one judge call each."""
    if not record.final_text or not record.final_text.strip():
        raise JudgeError(f"record {record.record_id} has no final text to judge")
    doc = _document_text(document)
    out = QualityScores(record.record_id, judge.id)

    def one(dim: Dimension) -> tuple[Dimension, float | None, str | None, str | None]:
        try:
            text = generate_fn(judge, build_judge_prompt(dim, doc, record.final_text)).text
        except Exception as exc:
            return dim, None, f"{type(exc).__name__}: {exc}", None
        try:
            return dim, parse_judge_response(text), None, text
        except JudgeError as exc:
            return dim, None, f"{type(exc).__name__}: {exc}", text

    if max_workers > 1:
        with ThreadPoolExecutor(min(max_workers, len(Dimension))) as pool:
            results = list(pool.map(one, Dimension))
    else:
        results = [one(d) for d in Dimension]
    for dim, score, err, raw in results:
        out.scores[dim.value] = score
        if err is not None:
            out.errors[dim.value] = err
        if raw is not None:
            out.raw[dim.value] = raw
    return out


def judge_records(
    records: Iterable[GenerationRecord],
    document: SourceDocument | str,
    judge: ModelEndpoint,
    out_path: str | Path | None = None,
    *,
    generate_fn=client_mod.generate,
    max_workers: int = 1,
) -> list[QualityScores]:
    """Judge every successful record, appending results to ``out_path`` as JSONL.

    Records already present in ``out_path`` with all four scores are skipped.
    """
    done: set[str] = set()
    if out_path is not None and Path(out_path).exists():
        done = {s.record_id for s in read_scores(out_path) if s.complete}
    results = []
    for rec in records:
        if not rec.ok or not rec.final_text or rec.record_id in done:
            continue
        scores = evaluate_quality(rec, document, judge, generate_fn=generate_fn, max_workers=max_workers)
        if out_path is not None:
            append_scores(out_path, scores)
        results.append(scores)
    return results


def append_scores(path: str | Path, scores: QualityScores) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(scores.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
        fh.flush()


def read_scores(path: str | Path) -> list[QualityScores]:
    """Load a scores file; for repeated record ids the last line wins."""
    latest: dict[str, QualityScores] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                s = QualityScores.from_dict(json.loads(line))
                latest[s.record_id] = s
    return list(latest.values())


@dataclass
class QualityTable:
    strategies: list[str]
    means: dict[str, dict[str, float | None]]
    counts: dict[str, dict[str, int]]

    def best(self, dim: Dimension | str) -> list[str]:
        d = _dimension(dim).value
        vals = {s: self.means[s][d] for s in self.strategies if self.means[s][d] is not None}
        if not vals:
            return []
        hi = max(vals.values())
        return [s for s, v in vals.items() if abs(v - hi) <= 1e-12]

    def markdown(self, digits: int = 2) -> str:
        from .report import display_name

        head = "| Prompting Strategy | " + " | ".join(d.value.capitalize() for d in TABLE_ORDER) + " |"
        lines = [head, "|---|" + "---|" * len(TABLE_ORDER)]
        best = {d: self.best(d) for d in TABLE_ORDER}
        for s in self.strategies:
            cells = []
            for d in TABLE_ORDER:
                v = self.means[s][d.value]
                txt = "—" if v is None else f"{v:.{digits}f}"
                cells.append(f"**{txt}**" if s in best[d] else txt)
            lines.append(f"| {display_name(s)} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def quality_table(
    scores: Iterable[QualityScores], records: Iterable[GenerationRecord]
) -> QualityTable:
    """Per-strategy arithmetic means of per-record scores (missing scores skipped)."""
    variant_of = {r.record_id: r.variant_id for r in records}
    sums: dict[str, dict[str, list[float]]] = {}
    for s in scores:
        v = variant_of.get(s.record_id)
        if v is None:
            continue
        bucket = sums.setdefault(v, {d.value: [] for d in Dimension})
        for d in Dimension:
            x = s.scores.get(d.value)
            if x is not None:
                bucket[d.value].append(x)
    rank = {v.value: i for i, v in enumerate(VariantId)}
    strategies = sorted(sums, key=lambda v: (rank.get(v, len(rank)), v))
    means = {v: {d: (sum(xs) / len(xs) if xs else None) for d, xs in b.items()} for v, b in sums.items()}
    counts = {v: {d: len(xs) for d, xs in b.items()} for v, b in sums.items()}
    return QualityTable(strategies, means, counts)
