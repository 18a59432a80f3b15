"""Analysis artifacts computed from a record store.

Everything here is a pure function of the records, so every number in a
table can be recomputed from the store alone. Plots are not rendered; the
fidelity CSV carries the columns needed to draw the ratio scatter.
"""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .errors import EmptyStore, MissingFamily
from .metrics import AggregateStats, SignificanceResult, aggregate, describe, paired_significance, relative_improvement
from .prompt import Family, VariantId
from .store import GenerationRecord

FIDELITY_COLUMNS = ("endpoint", "variant", "target", "attempt", "ratio", "class")

_FAMILY_OF = {
    VariantId.VANILLA_V1.value: Family.VANILLA.value,
    VariantId.VANILLA_V2.value: Family.VANILLA.value,
    VariantId.STORY_VANILLA.value: Family.VANILLA.value,
    VariantId.THINKING_V1.value: Family.THINKING.value,
    VariantId.THINKING_V2.value: Family.THINKING.value,
    VariantId.STORY_THINKING.value: Family.THINKING.value,
}


def display_name(variant_id: str) -> str:
    """``thinking-v1`` -> ``Thinking V1``; unknown ids pass through."""
    if variant_id in _FAMILY_OF:
        return " ".join(p.upper() if p[0] == "v" and p[1:].isdigit() else p.capitalize()
                        for p in variant_id.split("-"))
    return variant_id


def family_of(record: GenerationRecord) -> str:
    return record.family or _FAMILY_OF.get(record.variant_id, Family.VANILLA.value)


_VARIANT_RANK = {v.value: i for i, v in enumerate(VariantId)}


def _cell_order(r: GenerationRecord) -> tuple:
    # store order depends on worker timing when endpoints run in parallel
    return (r.endpoint_id, _VARIANT_RANK.get(r.variant_id, len(_VARIANT_RANK)), r.variant_id,
            r.target_words, r.attempt_index)


def _ok(records: Iterable[GenerationRecord]) -> list[GenerationRecord]:
    """Successful records in canonical cell order."""
    records = list(records)
    if not records:
        raise EmptyStore("store has no records")
    ok = sorted((r for r in records if r.ok), key=_cell_order)
    if not ok:
        raise EmptyStore("store has no successful records")
    return ok


def _ordered(values: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(values))


# -- MAPD table ----------------------------------------------------------------

@dataclass
class ReportTable:
    caption: str
    rows: list[str]
    columns: list[str]
    cells: dict[tuple[str, str], AggregateStats | None]
    best: dict[str, list[str]]
    column_family: dict[str, str] = field(default_factory=dict)
    ddof: int = 0

    def cell(self, row: str, col: str) -> AggregateStats | None:
        return self.cells.get((row, col))

    @property
    def missing(self) -> list[tuple[str, str]]:
        return [k for k, v in self.cells.items() if v is None]


def mapd_table(
    records: Iterable[GenerationRecord],
    *,
    rows: Sequence[str] | None = None,
    columns: Sequence[str] | None = None,
    ddof: int = 0,
    value: str = "apd",
) -> ReportTable:
    """Mean ± std of per-record APD with endpoints as rows and variants as columns.

    ``rows``/``columns`` fix the layout (e.g. from the store header) so that a
    variant with no successful records still shows up as an empty cell.
    The best (lowest-mean) column of each row is marked; ties mark all.
    """
    ok = _ok(records)
    rows = list(rows) if rows else _ordered(r.endpoint_id for r in ok)
    columns = list(columns) if columns else _ordered(r.variant_id for r in ok)
    stats = aggregate(ok, by=("endpoint_id", "variant_id"),
                      value=lambda r: getattr(r.metrics, value), ddof=ddof)
    cells = {(row, col): stats.get((row, col)) for row in rows for col in columns}
    best = {}
    for row in rows:
        present = {c: cells[(row, c)].mean for c in columns if cells[(row, c)] is not None}
        if present:
            lo = min(present.values())
            best[row] = [c for c, m in present.items() if abs(m - lo) <= 1e-12]
        else:
            best[row] = []
    fam = {}
    for r in ok:
        fam.setdefault(r.variant_id, family_of(r))
    for c in columns:
        fam.setdefault(c, _FAMILY_OF.get(c, Family.VANILLA.value))
    return ReportTable(
        caption="Mean absolute percentage deviation (MAPD ± std) by model and prompting strategy. "
                "Lower is better; best per model in bold.",
        rows=rows, columns=columns, cells=cells, best=best, column_family=fam, ddof=ddof,
    )


@dataclass
class Improvement:
    endpoint_id: str
    best_variant: str
    vanilla_variant: str
    vanilla_mapd: float
    thinking_variant: str
    thinking_mapd: float
    improvement_pct: float | None
    significance: SignificanceResult | None = None

    def line(self) -> str:
        imp = "n/a" if self.improvement_pct is None else f"{self.improvement_pct:.1f}%"
        s = (f"{self.endpoint_id}: best={self.best_variant}; "
             f"{self.thinking_variant} {self.thinking_mapd:.3f} vs {self.vanilla_variant} "
             f"{self.vanilla_mapd:.3f} -> {imp} improvement")
        if self.significance is not None:
            s += f" (p={self.significance.p_value:.4g}, n={self.significance.n_pairs})"
        return s


def improvement_summary(
    table: ReportTable,
    records: Iterable[GenerationRecord] | None = None,
    *,
    n_resamples: int = 10_000,
    seed: int = 0,
) -> list[Improvement]:
    """Best thinking-family cell against best vanilla-family cell, per row.

    With ``records`` given, a paired sign-flip test compares the two variants'
    per-record APDs, paired on (target, attempt).
    """
    by_key = {}
    if records is not None:
        for r in records:
            if r.ok:
                by_key[(r.endpoint_id, r.variant_id, r.target_words, r.attempt_index)] = r.metrics.apd
    out = []
    for row in table.rows:
        def best_of(family):
            cands = [(table.cells[(row, c)].mean, i, c) for i, c in enumerate(table.columns)
                     if table.column_family.get(c) == family and table.cells[(row, c)] is not None]
            return min(cands) if cands else None
        van, thk = best_of(Family.VANILLA.value), best_of(Family.THINKING.value)
        if van is None or thk is None:
            continue
        imp = relative_improvement(thk[0], van[0]) if van[0] > 0 else None
        sig = None
        if by_key:
            a = {k[2:]: v for k, v in by_key.items() if k[0] == row and k[1] == thk[2]}
            b = {k[2:]: v for k, v in by_key.items() if k[0] == row and k[1] == van[2]}
            common = sorted(set(a) & set(b))
            if len(common) >= 2:
                sig = paired_significance({k: a[k] for k in common}, {k: b[k] for k in common},
                                          n_resamples=n_resamples, seed=seed)
        out.append(Improvement(row, ", ".join(table.best[row]), van[2], van[0], thk[2], thk[0], imp, sig))
    return out


# -- fidelity scatter ------------------------------------------------------------

@dataclass(frozen=True)
class FidelityPoint:
    endpoint_id: str
    variant_id: str
    target_words: int
    attempt_index: int
    ratio: float
    over_under: str  # "over" | "under" | "exact"


@dataclass(frozen=True)
class OverlayRow:
    endpoint_id: str
    variant_id: str
    target_words: int
    mean: float
    std: float
    n: int


def _classify(ratio: float) -> str:
    return "over" if ratio > 1 else "under" if ratio < 1 else "exact"


def fidelity_points(
    records: Iterable[GenerationRecord], ddof: int = 0
) -> tuple[list[FidelityPoint], list[OverlayRow]]:
    """One ratio point per successful record, plus mean/std per (endpoint, variant, target)."""
    ok = _ok(records)
    points = [
        FidelityPoint(r.endpoint_id, r.variant_id, r.target_words, r.attempt_index,
                      r.metrics.ratio, _classify(r.metrics.ratio))
        for r in ok
    ]
    groups = aggregate(points, by=("endpoint_id", "variant_id", "target_words"), value="ratio", ddof=ddof)
    overlay = [OverlayRow(*k, s.mean, s.std, s.n) for k, s in groups.items()]
    return points, overlay


# -- cost ----------------------------------------------------------------------------

@dataclass(frozen=True)
class CostTable:
    vanilla_tokens: float
    thinking_tokens: float
    vanilla_latency_ms: float
    thinking_latency_ms: float
    n_vanilla: int
    n_thinking: int

    @property
    def token_ratio(self) -> float:
        return round(self.thinking_tokens / self.vanilla_tokens, 2)

    @property
    def latency_ratio(self) -> float:
        return round(self.thinking_latency_ms / self.vanilla_latency_ms, 2)


def cost_table(records: Iterable[GenerationRecord]) -> CostTable:
    """Average total tokens and latency per family, with thinking/vanilla ratios."""
    ok = _ok(records)
    fams = {Family.VANILLA.value: [], Family.THINKING.value: []}
    for r in ok:
        fams.setdefault(family_of(r), []).append(r)
    for fam, recs in fams.items():
        if not recs:
            raise MissingFamily(f"no successful {fam} records")
    v, t = fams[Family.VANILLA.value], fams[Family.THINKING.value]
    return CostTable(
        vanilla_tokens=describe(r.total_tokens for r in v).mean,
        thinking_tokens=describe(r.total_tokens for r in t).mean,
        vanilla_latency_ms=describe(r.latency_ms or 0.0 for r in v).mean,
        thinking_latency_ms=describe(r.latency_ms or 0.0 for r in t).mean,
        n_vanilla=len(v),
        n_thinking=len(t),
    )


# -- serialization -----------------------------------------------------------------

def _fmt(stats: AggregateStats | None, digits: int = 3) -> str:
    return "—" if stats is None else stats.format(digits)


def table_markdown(table: ReportTable, digits: int = 3) -> str:
    cols = [display_name(c) for c in table.columns]
    lines = [
        "| Model | " + " | ".join(cols) + " | Best |",
        "|---|" + "---|" * len(cols) + "---|",
    ]
    for row in table.rows:
        cells = []
        for c in table.columns:
            s = _fmt(table.cells[(row, c)], digits)
            cells.append(f"**{s}**" if c in table.best[row] else s)
        best = ", ".join(display_name(c) for c in table.best[row]) or "—"
        lines.append(f"| {row} | " + " | ".join(cells) + f" | {best} |")
    out = "\n".join(lines) + "\n"
    if table.missing:
        out += "\nMissing (no successful records): " + ", ".join(f"{r}/{c}" for r, c in table.missing) + "\n"
    return out


def table_csv(table: ReportTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["endpoint", "variant", "mean", "std", "n", "best", "missing"])
    for row in table.rows:
        for c in table.columns:
            s = table.cells[(row, c)]
            if s is None:
                w.writerow([row, c, "", "", 0, 0, 1])
            else:
                w.writerow([row, c, repr(s.mean), repr(s.std), s.n, int(c in table.best[row]), 0])
    return buf.getvalue()


def points_csv(points: Sequence[FidelityPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIDELITY_COLUMNS)
    for p in points:
        w.writerow([p.endpoint_id, p.variant_id, p.target_words, p.attempt_index, repr(p.ratio), p.over_under])
    return buf.getvalue()


def parse_points_csv(text: str) -> list[FidelityPoint]:
    rows = csv.DictReader(io.StringIO(text))
    return [FidelityPoint(r["endpoint"], r["variant"], int(r["target"]), int(r["attempt"]),
                          float(r["ratio"]), r["class"]) for r in rows]


def read_points_csv(path: str | Path) -> list[FidelityPoint]:
    return parse_points_csv(Path(path).read_text(encoding="utf-8"))


def overlay_csv(overlay: Sequence[OverlayRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["endpoint", "variant", "target", "mean_ratio", "std_ratio", "n"])
    for o in overlay:
        w.writerow([o.endpoint_id, o.variant_id, o.target_words, repr(o.mean), repr(o.std), o.n])
    return buf.getvalue()


def cost_markdown(cost: CostTable) -> str:
    return (
        "| Metric | Vanilla | Thinking |\n|---|---|---|\n"
        f"| Average tokens | {cost.vanilla_tokens:,.0f} | {cost.thinking_tokens:,.0f} ({cost.token_ratio:.2f}×) |\n"
        f"| Average latency | {cost.vanilla_latency_ms:,.1f} ms | {cost.thinking_latency_ms:,.1f} ms "
        f"({cost.latency_ratio:.2f}×) |\n"
    )


def _jsonl(items: Iterable[Any]) -> str:
    out = []
    for it in items:
        d = it.to_dict() if hasattr(it, "to_dict") else asdict(it)
        out.append(json.dumps(d, ensure_ascii=False, sort_keys=True))
    return "".join(line + "\n" for line in out)


def table_jsonl(table: ReportTable) -> str:
    rows = []
    for row in table.rows:
        for c in table.columns:
            s = table.cells[(row, c)]
            rows.append({"endpoint": row, "variant": c, "best": c in table.best[row],
                         "mean": None if s is None else s.mean, "std": None if s is None else s.std,
                         "n": 0 if s is None else s.n})
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)


def render(obj: Any, fmt: str) -> str:
    """Serialize a report object; ``fmt`` is ``csv``, ``markdown`` or ``jsonl``."""
    fmt = fmt.lower()
    if fmt in ("md",):
        fmt = "markdown"
    if isinstance(obj, ReportTable):
        return {"markdown": table_markdown, "csv": table_csv, "jsonl": table_jsonl}[fmt](obj)
    if isinstance(obj, CostTable):
        if fmt == "markdown":
            return cost_markdown(obj)
        if fmt == "jsonl":
            d = asdict(obj) | {"token_ratio": obj.token_ratio, "latency_ratio": obj.latency_ratio}
            return json.dumps(d, sort_keys=True) + "\n"
        if fmt == "csv":
            return ("metric,vanilla,thinking,ratio\n"
                    f"tokens,{obj.vanilla_tokens!r},{obj.thinking_tokens!r},{obj.token_ratio:.2f}\n"
                    f"latency_ms,{obj.vanilla_latency_ms!r},{obj.thinking_latency_ms!r},{obj.latency_ratio:.2f}\n")
    if isinstance(obj, (list, tuple)):
        items = list(obj)
        if items and isinstance(items[0], FidelityPoint) and fmt == "csv":
            return points_csv(items)
        if items and isinstance(items[0], OverlayRow) and fmt == "csv":
            return overlay_csv(items)
        if fmt == "jsonl":
            return _jsonl(items)
        if not items and fmt == "csv":
            return ",".join(FIDELITY_COLUMNS) + "\n"
    raise ValueError(f"cannot export {type(obj).__name__} as {fmt}")


def export(obj: Any, path: str | Path, fmt: str | None = None) -> Path:
    """Write ``obj`` to ``path``; the format defaults from the file suffix."""
    path = Path(path)
    if fmt is None:
        fmt = {".md": "markdown", ".csv": "csv", ".jsonl": "jsonl"}.get(path.suffix.lower())
        if fmt is None:
            raise ValueError(f"cannot infer export format from {path.name}; pass fmt")
    text = render(obj, fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
