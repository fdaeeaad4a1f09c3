"""Comparison tables: the published figures, then a fresh run of both setups."""

from dpsent.experiment import ExperimentConfig, run
from dpsent.report import REFERENCE_RESULTS, RunReport, compare, render_comparison

s, d = REFERENCE_RESULTS["single"], REFERENCE_RESULTS["distributed"]
published = compare(
    RunReport.from_values("single", s["processing_seconds"], s["accuracy"]),
    RunReport.from_values("distributed", d["processing_seconds"], d["accuracy"], d["workers"]),
)
print("published figures (stated as 75% and 3.5%):")
print(render_comparison(published))

out = run(ExperimentConfig(subsample=8000), "both", write=False)
print("this package, 8,000 bundled documents, 4 simulated workers (virtual-clock seconds):")
print(out.texts["comparison"])
print(out.texts["bandwidth"])
