"""Evaluation harness: confusion accounting, metrics, experiments, reports.

Outcomes are tallied per (frame, target-label) pair. A frame contributes
one pair for every label in the union of its truth and its predictions;
a frame with neither contributes a single true negative. Accuracy,
precision, and recall derive from the tallies; precision and recall are
reported as absent (None) when their denominator is zero, never as 0 or 1.
"""

from __future__ import annotations

import csv
import enum
import heapq
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .backends import (
    DEFAULT_PROFILES,
    BackendCategory,
    BackendProfile,
    FaceCollection,
    RemoteBackend,
    SimulatedBackend,
    load_profiles,
)
from .cloud import CloudService
from .dataset import DEFAULT_KNOWN_FACES, Dataset, load_manifest
from .device import (
    DEFAULT_DEBOUNCE_MS,
    MotionScript,
    load_motion_script,
    run_motion_script,
    script_covering,
)
from .edge import EdgeConfig, EdgePipeline, RetryPolicy, SamplingPolicy
from .errors import ValidationError
from .model import (
    DEFAULT_THRESHOLD,
    EventIdFactory,
    FaceCategory,
    Label,
    canonical_json,
)
from .transport import CloudClient, FailureInjector, NetworkModel

__all__ = [
    "Outcome",
    "ConfusionCounts",
    "MetricsReport",
    "LatencyStats",
    "classify_outcome",
    "tally_frame",
    "compute_metrics",
    "f1_score",
    "latency_stats",
    "ExperimentConfig",
    "FrameOutcome",
    "ExperimentReport",
    "run_experiment",
    "run_threshold_study",
    "compare_backends",
    "ComparisonTable",
    "CSV_COLUMNS",
]


class Outcome(enum.Enum):
    TP = "tp"
    FN = "fn"
    FP = "fp"
    TN = "tn"


@dataclass
class ConfusionCounts:
    tp: int = 0
    fn: int = 0
    fp: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def add(self, outcome: Outcome, count: int = 1) -> None:
        setattr(self, outcome.value, getattr(self, outcome.value) + count)

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fn + other.fn, self.fp + other.fp, self.tn + other.tn
        )


def classify_outcome(truth: set[Label], predicted: set[Label], target: Label) -> Outcome:
    """Four-way outcome of one prediction for one target label."""
    in_truth = target in truth
    in_predicted = target in predicted
    if in_truth:
        return Outcome.TP if in_predicted else Outcome.FN
    return Outcome.FP if in_predicted else Outcome.TN


def tally_frame(truth: set[Label], predicted: set[Label]) -> ConfusionCounts:
    """Confusion contribution of one frame, per-object accounting.

    Targets are the union of truth and predictions; a frame with neither
    counts as one true negative (absence correctly reported).
    """
    counts = ConfusionCounts()
    targets = truth | predicted
    if not targets:
        counts.tn = 1
        return counts
    for target in targets:
        counts.add(classify_outcome(truth, predicted, target))
    return counts


def f1_score(precision: float | None, recall: float | None) -> float | None:
    """Harmonic mean of precision and recall; None when undefined."""
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class MetricsReport:
    """Confusion counts plus the derived quality metrics."""

    counts: ConfusionCounts
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    scenario: str | None = None
    backend_id: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "backend_id": self.backend_id,
            "tp": self.counts.tp,
            "fn": self.counts.fn,
            "fp": self.counts.fp,
            "tn": self.counts.tn,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def compute_metrics(
    counts: ConfusionCounts, scenario: str | None = None, backend_id: str = ""
) -> MetricsReport:
    """Accuracy, precision, recall, and F1 from one confusion tally."""
    total = counts.total
    if total <= 0:
        raise ValidationError("cannot derive metrics from an empty tally")
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp > 0 else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn > 0 else None
    return MetricsReport(
        counts=counts,
        accuracy=(counts.tp + counts.tn) / total,
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        scenario=scenario,
        backend_id=backend_id,
    )


@dataclass(frozen=True)
class LatencyStats:
    backend_id: str
    samples: int
    mean_ms: float
    p50_ms: float
    p95_ms: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "backend_id": self.backend_id,
            "samples": self.samples,
            "mean_ms": self.mean_ms,
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
        }


def latency_stats(trace: Sequence[tuple[int, int]], backend_id: str = "") -> LatencyStats:
    """Round-trip statistics from (request_at, response_at) pairs."""
    if not trace:
        raise ValidationError("latency trace is empty")
    samples = np.array([response - request for request, response in trace], dtype=float)
    if np.any(samples < 0):
        raise ValidationError("negative latency sample in trace")
    return LatencyStats(
        backend_id=backend_id,
        samples=len(samples),
        mean_ms=float(np.mean(samples)),
        p50_ms=float(np.percentile(samples, 50)),
        p95_ms=float(np.percentile(samples, 95)),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a reproducible end-to-end run depends on.

    Without explicit ``scripts``, each device gets an auto-generated motion
    script that triggers every one of its frames, evenly spaced.
    """

    dataset: str | None = None
    backend_id: str = "aws-saas"
    threshold: float = DEFAULT_THRESHOLD
    seed: int = 0
    network: NetworkModel = field(default_factory=NetworkModel)
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    sampling: SamplingPolicy = field(default_factory=SamplingPolicy)
    debounce_ms: int = DEFAULT_DEBOUNCE_MS
    event_spacing_ms: int = 2000
    profiles_path: str | None = None
    enroll: Mapping[str, FaceCategory] = field(
        default_factory=lambda: dict(DEFAULT_KNOWN_FACES)
    )
    scripts: tuple[MotionScript, ...] | None = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        network_cfg = dict(data.get("network", {}))
        network_cfg.setdefault("seed", int(data.get("seed", 0)))
        raw_enroll = data.get("enroll")
        if raw_enroll is None:
            enroll = dict(DEFAULT_KNOWN_FACES)
        else:
            enroll = {token: FaceCategory(cat) for token, cat in dict(raw_enroll).items()}
        scripts = None
        if data.get("scripts"):
            scripts = tuple(
                load_motion_script(entry) if isinstance(entry, str)
                else MotionScript.from_dict(entry)
                for entry in data["scripts"]
            )
        return cls(
            dataset=data.get("dataset"),
            backend_id=data.get("backend_id", "aws-saas"),
            threshold=float(data.get("threshold", DEFAULT_THRESHOLD)),
            seed=int(data.get("seed", 0)),
            network=NetworkModel(**network_cfg),
            retry=RetryPolicy(**data.get("retry", {})),
            sampling=SamplingPolicy(**data.get("sampling", {})),
            debounce_ms=int(data.get("debounce_ms", DEFAULT_DEBOUNCE_MS)),
            event_spacing_ms=int(data.get("event_spacing_ms", 2000)),
            profiles_path=data.get("profiles"),
            enroll=enroll,
            scripts=scripts,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": self.dataset,
            "backend_id": self.backend_id,
            "threshold": self.threshold,
            "seed": self.seed,
            "network": self.network.to_dict(),
            "retry": {"max_attempts": self.retry.max_attempts,
                      "backoff_ms": self.retry.backoff_ms},
            "sampling": {"max_frames_per_event": self.sampling.max_frames_per_event,
                         "min_interval_ms": self.sampling.min_interval_ms},
            "debounce_ms": self.debounce_ms,
            "event_spacing_ms": self.event_spacing_ms,
            "profiles": self.profiles_path,
            "enroll": {k: v.value for k, v in sorted(self.enroll.items())},
            "scripts": (None if self.scripts is None
                        else [s.to_dict() for s in self.scripts]),
        }


@dataclass(frozen=True)
class FrameOutcome:
    """Raw (truth, prediction) pair for one analyzed frame."""

    frame_id: str
    event_id: str
    scenario: str
    truth: tuple[str, ...]
    predicted: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "frame_id": self.frame_id,
            "event_id": self.event_id,
            "scenario": self.scenario,
            "truth": list(self.truth),
            "predicted": list(self.predicted),
        }


CSV_COLUMNS = [
    "backend", "scenario", "tp", "fn", "fp", "tn", "accuracy", "precision",
    "recall", "f1", "mean_latency_ms", "p95_latency_ms", "memory_mb", "cpu_pct",
]


@dataclass
class ExperimentReport:
    """Full output of one end-to-end run."""

    backend_id: str
    dataset_fingerprint: str
    config: dict[str, Any]
    scenario_metrics: dict[str, MetricsReport]
    overall: MetricsReport
    latency: LatencyStats
    memory_mb: float
    cpu_pct: float
    counters: dict[str, int]
    frames: list[FrameOutcome] = field(default_factory=list)

    def to_dict(self, include_trace: bool = False) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "backend_id": self.backend_id,
            "dataset_fingerprint": self.dataset_fingerprint,
            "config": self.config,
            "counters": self.counters,
            "scenario_metrics": {
                name: report.to_dict() for name, report in sorted(self.scenario_metrics.items())
            },
            "overall": self.overall.to_dict(),
            "latency": self.latency.to_dict(),
            "resources": {"memory_mb": self.memory_mb, "cpu_pct": self.cpu_pct},
        }
        if include_trace:
            doc["frames"] = [f.to_dict() for f in self.frames]
        return doc

    def write_json(self, path: str | Path, include_trace: bool = False) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(self.to_dict(include_trace)))
            fh.write("\n")

    def _csv_rows(self) -> list[dict[str, Any]]:
        rows = []
        reports = list(self.scenario_metrics.items()) + [("overall", self.overall)]
        for name, metrics in reports:
            rows.append({
                "backend": self.backend_id,
                "scenario": name,
                "tp": metrics.counts.tp,
                "fn": metrics.counts.fn,
                "fp": metrics.counts.fp,
                "tn": metrics.counts.tn,
                "accuracy": metrics.accuracy,
                "precision": "" if metrics.precision is None else metrics.precision,
                "recall": "" if metrics.recall is None else metrics.recall,
                "f1": "" if metrics.f1 is None else metrics.f1,
                "mean_latency_ms": self.latency.mean_ms,
                "p95_latency_ms": self.latency.p95_ms,
                "memory_mb": self.memory_mb,
                "cpu_pct": self.cpu_pct,
            })
        return rows

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(self._csv_rows())


def _resolve_profiles(config: ExperimentConfig) -> dict[str, BackendProfile]:
    if config.profiles_path:
        return load_profiles(config.profiles_path)
    return dict(DEFAULT_PROFILES)


def _dump_partial_trace(path, config, counters, outcomes) -> None:
    doc = {
        "config": config.to_dict(),
        "counters": counters,
        "frames": [
            {"event_id": outcome.event.event_id, "frame_id": frame.frame_id,
             "delivered": outcome.ack is not None}
            for outcome, frame in outcomes
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))
        fh.write("\n")


def _make_backend(
    profile: BackendProfile,
    seed: int,
    client: CloudClient,
    enroll: Mapping[str, FaceCategory],
):
    if profile.category is BackendCategory.CLOUD_SAAS:
        return RemoteBackend(client, profile)
    collection = FaceCollection("on-device")
    for identity, category in sorted(enroll.items()):
        collection.enroll(identity, category)
    return SimulatedBackend(profile, seed, collection)


def run_experiment(
    config: ExperimentConfig,
    dataset: Dataset | None = None,
    profiles: Mapping[str, BackendProfile] | None = None,
    failure_injector: FailureInjector | None = None,
    partial_trace_path: str | Path | None = None,
) -> ExperimentReport:
    """Drive device -> edge -> cloud end to end and tally the results.

    Deterministic given the config seed: detection draws, network jitter,
    credentials, and stream sequencing are all derived from it. A component
    error aborts the run; when ``partial_trace_path`` is set, the frames
    processed so far are dumped there before the error propagates.
    """
    if dataset is None:
        if config.dataset is None:
            raise ValidationError("experiment config names no dataset")
        dataset = load_manifest(config.dataset)
    profile_map = dict(profiles) if profiles is not None else _resolve_profiles(config)
    if config.backend_id not in profile_map:
        raise ValidationError(f"unknown backend profile: {config.backend_id}")
    profile = profile_map[config.backend_id]

    service = CloudService(seed=config.seed, profiles=profile_map)
    service.subscribe("operator")
    client = CloudClient(
        service,
        network=replace(config.network, seed=config.seed),
        failure_injector=failure_injector,
    )
    for identity, category in sorted(config.enroll.items()):
        client.enroll_face(identity, category.value)

    backend = _make_backend(profile, config.seed, client, config.enroll)
    edge_config = EdgeConfig(
        backend_id=config.backend_id,
        threshold=config.threshold,
        retry=config.retry,
        sampling=config.sampling,
    )
    pipeline = EdgePipeline(edge_config, backend, client)

    sessions: dict[str, str] = {}
    for device_id in dataset.device_ids:
        _, secret = client.register_device(device_id)
        sessions[device_id] = client.authenticate(device_id, secret)

    event_ids = EventIdFactory()
    scripts = config.scripts or tuple(
        script_covering(
            dataset, device_id,
            spacing_ms=config.event_spacing_ms, debounce_ms=config.debounce_ms,
        )
        for device_id in dataset.device_ids
    )
    streams = [run_motion_script(script, dataset, event_ids) for script in scripts]
    merged = heapq.merge(*streams, key=lambda pair: (pair[0].at, pair[0].device_id))

    counters = {"events": 0, "sampled": 0, "ingested": 0, "dead_letters": 0}
    outcomes = []
    try:
        for event, frame in merged:
            counters["events"] += 1
            outcome = pipeline.process(event, frame, sessions[event.device_id])
            if outcome.sampled:
                counters["sampled"] += 1
            if outcome.ack is not None:
                counters["ingested"] += 1
            if outcome.dead_lettered:
                counters["dead_letters"] += 1
            outcomes.append((outcome, frame))
    except Exception:
        if partial_trace_path is not None:
            _dump_partial_trace(partial_trace_path, config, counters, outcomes)
        raise
    service.run_dispatch()
    counters["notifications"] = len(service.hub.subscription("operator").delivery_log)

    frames: list[FrameOutcome] = []
    per_scenario: dict[str, ConfusionCounts] = {}
    stored = {record.event_id: record for record in service.store.all_records()}
    for outcome, frame in outcomes:
        if outcome.record is None:
            continue
        # Detection quality is tallied from what the cloud persisted; a
        # dead-lettered record falls back to the edge-side copy, since the
        # analysis happened even when delivery did not (counted separately).
        record = stored.get(outcome.record.event_id, outcome.record)
        predicted = {d.label for d in record.detections}
        frames.append(
            FrameOutcome(
                frame_id=frame.frame_id,
                event_id=record.event_id,
                scenario=frame.scenario.value,
                truth=tuple(sorted(l.name for l in frame.truth)),
                predicted=tuple(sorted(l.name for l in predicted)),
            )
        )
        tally = tally_frame(set(frame.truth), predicted)
        key = frame.scenario.value
        per_scenario[key] = per_scenario.get(key, ConfusionCounts()) + tally

    scenario_metrics = {
        name: compute_metrics(counts, scenario=name, backend_id=config.backend_id)
        for name, counts in per_scenario.items()
    }
    overall_counts = ConfusionCounts()
    for counts in per_scenario.values():
        overall_counts = overall_counts + counts
    overall = compute_metrics(overall_counts, scenario=None, backend_id=config.backend_id)
    latency = latency_stats(
        [(req, resp) for _, _, req, resp in pipeline.latency_trace],
        backend_id=config.backend_id,
    )
    return ExperimentReport(
        backend_id=config.backend_id,
        dataset_fingerprint=dataset.fingerprint(),
        config=config.to_dict(),
        scenario_metrics=scenario_metrics,
        overall=overall,
        latency=latency,
        memory_mb=profile.memory_mb,
        cpu_pct=profile.cpu_pct,
        counters=counters,
        frames=frames,
    )


def run_threshold_study(
    config: ExperimentConfig,
    dataset: Dataset | None = None,
    thresholds: Iterable[float] = (90.0, 70.0),
) -> dict[float, ExperimentReport]:
    """Re-run one seeded experiment at several confidence thresholds.

    The study uses a perfect-emission variant of the configured backend
    (recall 1, no spurious detections), so every false negative it reports
    is caused by thresholding alone. With the default confidence model the
    stricter threshold clips low-confidence detections into false
    negatives; the relaxed threshold eliminates all of them.
    """
    profiles = _resolve_profiles(config)
    profiles[config.backend_id] = profiles[config.backend_id].with_perfect_recall()
    if dataset is None:
        if config.dataset is None:
            raise ValidationError("experiment config names no dataset")
        dataset = load_manifest(config.dataset)
    results = {}
    for threshold in thresholds:
        run_config = replace(config, threshold=float(threshold))
        results[float(threshold)] = run_experiment(run_config, dataset=dataset, profiles=profiles)
    return results


@dataclass
class ComparisonTable:
    """Backends side by side, best overall F1 first."""

    rows: list[dict[str, Any]]

    def to_dict(self) -> dict[str, Any]:
        return {"rows": self.rows}

    def write_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(self.to_dict()))
            fh.write("\n")

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({col: row.get(col, "") for col in CSV_COLUMNS})


def compare_backends(reports: Sequence[ExperimentReport]) -> ComparisonTable:
    """Comparative table of >= 2 reports over the same dataset."""
    if len(reports) < 2:
        raise ValidationError("comparison needs at least two reports")
    fingerprints = {report.dataset_fingerprint for report in reports}
    if len(fingerprints) != 1:
        raise ValidationError("reports cover different datasets; comparison is meaningless")
    rows = []
    for report in reports:
        overall = report.overall
        rows.append({
            "backend": report.backend_id,
            "scenario": "overall",
            "tp": overall.counts.tp,
            "fn": overall.counts.fn,
            "fp": overall.counts.fp,
            "tn": overall.counts.tn,
            "accuracy": overall.accuracy,
            "precision": "" if overall.precision is None else overall.precision,
            "recall": "" if overall.recall is None else overall.recall,
            "f1": "" if overall.f1 is None else overall.f1,
            "mean_latency_ms": report.latency.mean_ms,
            "p95_latency_ms": report.latency.p95_ms,
            "memory_mb": report.memory_mb,
            "cpu_pct": report.cpu_pct,
        })
    rows.sort(key=lambda row: (-(row["f1"] if row["f1"] != "" else -1.0), row["backend"]))
    return ComparisonTable(rows)
