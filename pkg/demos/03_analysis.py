"""Turn the store from 02_mock_experiment.py into tables and plot data."""

from __future__ import annotations

from pathlib import Path

from lengthfidelity import report
from lengthfidelity.store import read_store

out = Path(__file__).parent / "out"
_, records = read_store(out / "records.jsonl")

table = report.mapd_table(records)
print(report.render(table, "markdown"))

for imp in report.improvement_summary(table, records, seed=0):
    print(imp.line())

points, overlay = report.fidelity_points(records)
report.export(points, out / "fidelity_points.csv")
report.export(overlay, out / "fidelity_overlay.csv", "csv")
print(f"\n{len(points)} fidelity points written; overlay rows:")
for row in overlay[:6]:
    print(f"  {row.endpoint_id:<7} {row.variant_id:<12} t={row.target_words:<4} ratio {row.mean:.3f} ± {row.std:.3f}")

print()
print(report.render(report.cost_table(records), "markdown"))
