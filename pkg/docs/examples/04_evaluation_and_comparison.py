"""The evaluation harness: calibration runs, the threshold study, comparison.

One seeded experiment drives the whole stack end to end and tallies
confusion counts against the manifest's ground truth. Comparing backends
reproduces the headline trade-off: the remote service wins on quality and
footprint but pays a network round trip on every frame.
"""

from doorsim import (
    ExperimentConfig,
    GeneratorConfig,
    ScenarioKind,
    compare_backends,
    generate_dataset,
    run_experiment,
    run_threshold_study,
)
from doorsim.dataset import Dataset

dataset = Dataset(generate_dataset(GeneratorConfig(
    scenarios=tuple(ScenarioKind), positives=60, negatives=60, seed=2024,
)))
print(f"evaluation dataset: {len(dataset)} frames across all five scenarios")

# --- one end-to-end run -----------------------------------------------------------
config = ExperimentConfig(backend_id="aws-saas", threshold=70.0, seed=2024)
report = run_experiment(config, dataset=dataset)
print("\nper-scenario metrics for the remote backend:")
print("scenario             tp  fn  fp   tn  accuracy precision recall")
for name, metrics in sorted(report.scenario_metrics.items()):
    counts = metrics.counts
    print(f"{name:<20} {counts.tp:>3} {counts.fn:>3} {counts.fp:>3} {counts.tn:>4}"
          f"  {metrics.accuracy:>7.2%} {metrics.precision:>8.2%} {metrics.recall:>6.2%}")
print(f"overall F1 {report.overall.f1:.4f}, "
      f"mean latency {report.latency.mean_ms:.1f} ms over {report.latency.samples} calls")

# --- the confidence-threshold study ------------------------------------------------
study = run_threshold_study(config, dataset=dataset, thresholds=(90.0, 70.0))
print("\nthreshold study (perfect-emission variant of the same backend):")
for threshold, result in sorted(study.items(), reverse=True):
    counts = result.overall.counts
    print(f"  threshold {threshold:>4.0f}: fn={counts.fn:<4} tp={counts.tp}")
print("dropping the threshold to 70 eliminates every false negative")

# --- compare all four backends ------------------------------------------------------
reports = [
    run_experiment(ExperimentConfig(backend_id=backend_id, threshold=70.0, seed=2024),
                   dataset=dataset)
    for backend_id in ("aws-saas", "mobilenet-ssd", "hog-svm", "haar")
]
table = compare_backends(reports)
print("\nbackend          f1      mean_ms  p95_ms  memory_mb  cpu_pct")
for row in table.rows:
    print(f"{row['backend']:<15} {row['f1']:.4f}  {row['mean_latency_ms']:>7.1f}"
          f" {row['p95_latency_ms']:>7.1f} {row['memory_mb']:>10} {row['cpu_pct']:>8}")
best = table.rows[0]
print(f"\nbest overall F1: {best['backend']} "
      f"(highest quality, {best['memory_mb']} MB footprint, slowest round trip)")
