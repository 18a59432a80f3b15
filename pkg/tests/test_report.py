from __future__ import annotations

import json

import pytest

from conftest import make_plan, make_record
from lengthfidelity.client import mock_model
from lengthfidelity.errors import EmptyStore, MissingFamily
from lengthfidelity.report import (
    cost_table,
    display_name,
    export,
    fidelity_points,
    improvement_summary,
    mapd_table,
    read_points_csv,
    render,
)
from lengthfidelity.runner import run
from lengthfidelity.store import read_store


def _records_with_means(endpoint, means: dict[str, float], targets=(20, 50), attempts=2):
    """Records whose APD is the same for every cell, so the cell mean is exact."""
    out = []
    for variant, apd in means.items():
        for t in targets:
            for a in range(attempts):
                out.append(make_record(endpoint, variant, 1000, a + 10 * t, round(1000 * (1 + apd))))
    return out


def test_mapd_table_best_and_improvement():
    recs = _records_with_means("model-a", {"vanilla-v1": 0.141, "vanilla-v2": 0.2, "thinking-v1": 0.088,
                                              "thinking-v2": 0.15})
    table = mapd_table(recs)
    assert table.best["model-a"] == ["thinking-v1"]
    assert table.cell("model-a", "thinking-v1").mean == pytest.approx(0.088, abs=1e-12)
    (imp,) = improvement_summary(table, recs)
    assert imp.vanilla_variant == "vanilla-v1" and imp.thinking_variant == "thinking-v1"
    assert abs(imp.improvement_pct - 37.6) <= 0.05
    assert "37.6% improvement" in imp.line()
    assert imp.significance.p_value == pytest.approx(2 / 2**4)  # 4 identical positive pairs


def test_two_variant_improvement_50pct():
    recs = _records_with_means("m", {"vanilla-v1": 0.2, "thinking-v1": 0.1})
    (imp,) = improvement_summary(mapd_table(recs))
    assert imp.improvement_pct == pytest.approx(50.0)


def test_ties_mark_all_minima():
    recs = _records_with_means("m", {"vanilla-v1": 0.1, "thinking-v1": 0.1, "thinking-v2": 0.3})
    assert mapd_table(recs).best["m"] == ["vanilla-v1", "thinking-v1"]


def test_missing_variant_flagged():
    recs = _records_with_means("m", {"vanilla-v1": 0.1, "thinking-v1": 0.05})
    table = mapd_table(recs, rows=["m"], columns=["vanilla-v1", "vanilla-v2", "thinking-v1"])
    assert table.missing == [("m", "vanilla-v2")]
    md = render(table, "markdown")
    assert "| m | 0.100 ± 0.000 | — | **0.050 ± 0.000** | Thinking V1 |" in md
    assert "Missing (no successful records): m/vanilla-v2" in md


def test_std_population_default_sample_flag():
    recs = [make_record("m", "vanilla-v1", 10, i, g) for i, g in enumerate((10, 12, 14))]
    pop = mapd_table(recs).cell("m", "vanilla-v1")
    samp = mapd_table(recs, ddof=1).cell("m", "vanilla-v1")
    assert pop.std == pytest.approx(0.16329931618554522)
    assert samp.std == pytest.approx(0.2)


def test_empty_store():
    with pytest.raises(EmptyStore):
        mapd_table([])
    failed = make_record("m", "vanilla-v1", 20, 0, 20)
    failed.status = "failed"
    with pytest.raises(EmptyStore):
        fidelity_points([failed])


def test_union_equals_pooling():
    a = _records_with_means("m1", {"vanilla-v1": 0.1, "thinking-v1": 0.3})
    b = [make_record("m1", "vanilla-v1", 20, 99, 30), make_record("m2", "thinking-v1", 20, 0, 21)]
    union = mapd_table(a + b)
    assert union.cell("m1", "vanilla-v1").mean == pytest.approx((0.1 * 4 + 0.5) / 5)
    assert union.cell("m2", "thinking-v1").mean == pytest.approx(0.05)
    assert union.cell("m1", "thinking-v1") == mapd_table(a).cell("m1", "thinking-v1")


def test_fidelity_points_classes():
    pts, overlay = fidelity_points([make_record("m", "vanilla-v1", 20, 0, 26), make_record("m", "vanilla-v1", 20, 1, 20),
                                    make_record("m", "vanilla-v1", 20, 2, 10)])
    assert [(p.ratio, p.over_under) for p in pts] == [(1.3, "over"), (1.0, "exact"), (0.5, "under")]
    (row,) = overlay
    assert row.mean == pytest.approx(0.9333333333333332) and row.n == 3


def test_verbose_store_all_ratio_three(tmp_path):
    run(make_plan([mock_model("verbose", id="v")]), tmp_path / "s.jsonl")
    pts, _ = fidelity_points(read_store(tmp_path / "s.jsonl")[1])
    assert len(pts) == 16 and {p.ratio for p in pts} == {3.0}


def test_exact_store_zero_table(tmp_path):
    run(make_plan([mock_model(id="e")]), tmp_path / "s.jsonl")
    table = mapd_table(read_store(tmp_path / "s.jsonl")[1])
    md = render(table, "markdown")
    assert md.count("**0.000 ± 0.000**") == 4
    assert table.best["e"] == ["vanilla-v1", "vanilla-v2", "thinking-v1", "thinking-v2"]


def test_cost_table():
    recs = [make_record("m", "vanilla-v1", 20, 0, 20, tokens=(7000, 914), latency=1000.1),
            make_record("m", "thinking-v1", 20, 0, 20, tokens=(7000, 1046), latency=1573.8)]
    cost = cost_table(recs)
    assert (cost.token_ratio, cost.latency_ratio) == (1.02, 1.57)
    md = render(cost, "markdown")
    assert "| Average tokens | 7,914 | 8,046 (1.02×) |" in md
    assert "| Average latency | 1,000.1 ms | 1,573.8 ms (1.57×) |" in md
    same = cost_table([make_record("m", "vanilla-v1", 20, 0, 20, tokens=(5, 5), latency=3.0),
                       make_record("m", "thinking-v1", 20, 0, 20, tokens=(5, 5), latency=3.0)])
    assert (same.token_ratio, same.latency_ratio) == (1.0, 1.0)
    with pytest.raises(MissingFamily):
        cost_table(recs[:1])


def test_story_family_mapping():
    recs = [make_record("m", "story-vanilla", 20, 0, 20, family="vanilla", tokens=(1, 1), latency=1.0),
            make_record("m", "story-thinking", 20, 0, 20, family="thinking", tokens=(2, 2), latency=2.0)]
    assert cost_table(recs).token_ratio == 2.0
    assert display_name("story-thinking") == "Story Thinking"
    assert display_name("vanilla-v2") == "Vanilla V2"


def test_exports_deterministic_and_round_trip(tmp_path):
    run(make_plan([mock_model("offset", offset=3, id="o"), mock_model("scale", scale=1.3, id="s")]),
        tmp_path / "s.jsonl")
    _, records = read_store(tmp_path / "s.jsonl")
    table = mapd_table(records)
    pts, overlay = fidelity_points(records)
    for name, obj in (("t.md", table), ("t.csv", table), ("t.jsonl", table), ("p.csv", pts), ("o.csv", overlay)):
        a = export(obj, tmp_path / "a" / name).read_bytes()
        b = export(obj, tmp_path / "b" / name).read_bytes()
        assert a == b
    header = (tmp_path / "a" / "p.csv").read_text().splitlines()[0]
    assert header == "endpoint,variant,target,attempt,ratio,class"
    assert read_points_csv(tmp_path / "a" / "p.csv") == pts
    rows = [json.loads(x) for x in (tmp_path / "a" / "t.jsonl").read_text().splitlines()]
    assert len(rows) == 8
    assert render(table, "markdown").count("\n| o |") == 1
    with pytest.raises(ValueError):
        export(table, tmp_path / "t.txt")


def test_exports_independent_of_store_order(tmp_path):
    run(make_plan([mock_model("offset", offset=3, id="o"), mock_model("scale", scale=1.3, id="s")],
                  concurrency_limit=2), tmp_path / "s.jsonl")
    _, records = read_store(tmp_path / "s.jsonl")
    shuffled = list(reversed(records))
    for kind in ("csv", "markdown", "jsonl"):
        assert render(mapd_table(records), kind) == render(mapd_table(shuffled), kind)
    assert render(fidelity_points(records)[0], "csv") == render(fidelity_points(shuffled)[0], "csv")
    assert render(fidelity_points(records)[1], "csv") == render(fidelity_points(shuffled)[1], "csv")
    assert mapd_table(shuffled).columns == ["vanilla-v1", "vanilla-v2", "thinking-v1", "thinking-v2"]
