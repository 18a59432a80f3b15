"""Score stored summaries with an LLM judge, one call per quality dimension.

The plan's judge here is a mock that always answers 0.9; one dimension is
scripted to return junk so the per-dimension error handling is visible.
"""

from __future__ import annotations

from pathlib import Path

from lengthfidelity.client import mock_model
from lengthfidelity.judge import build_judge_prompt, evaluate_quality, quality_table
from lengthfidelity.runner import load_plan
from lengthfidelity.store import read_store

here = Path(__file__).parent
plan = load_plan(here / "data" / "plan.yaml")
_, records = read_store(here / "out" / "records.jsonl")
records = [r for r in records if r.ok and r.target_words == 50]

print(build_judge_prompt("faithfulness", plan.document.text, records[0].final_text)[:400], "...\n")

picky = mock_model("judge", score=0.9, responses={"Dimension: Relevance": "Looks fine to me!"}, id="picky")
one = evaluate_quality(records[0], plan.document, picky)
print("scores:", one.scores)
print("errors:", one.errors, "\n")

scores = [evaluate_quality(r, plan.document, plan.judge) for r in records]
print(quality_table(scores, records).markdown())
