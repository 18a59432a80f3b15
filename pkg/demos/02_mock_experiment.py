"""Run a small experiment grid against offline mock models.

The "steady" mock always hits the target; "wordy" overshoots by 30%. The run
writes an append-only JSONL store, and resuming a finished store is free.
"""

from __future__ import annotations

from pathlib import Path

from lengthfidelity.runner import load_plan, resume, run
from lengthfidelity.store import audit, read_store

here = Path(__file__).parent
plan = load_plan(here / "data" / "plan.yaml")
print(f"{plan.cell_count} cells: {len(plan.endpoints)} endpoints x {len(plan.variants)} variants "
      f"x {len(plan.targets)} targets x {plan.attempts} attempts")

result = run(plan, overwrite=True)
print(result.summary(), "->", result.path.resolve())

# A second pass finds nothing missing.
print("resume:", resume(plan).summary())

header, records = read_store(result.path)
check = audit(header, records)
print(f"audit: {check.checked} records recounted, {len(check.mismatches)} mismatches")

for rec in records[:: len(records) // 4]:
    print(f"  {rec.record_id:<28} {rec.parse_method:<8} {rec.word_count:>4} words  ratio {rec.metrics.ratio:.2f}")
