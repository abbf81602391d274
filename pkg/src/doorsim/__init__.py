"""doorsim: a deterministic device/edge/cloud smart-doorbell simulator.

The package simulates the full journey of a motion event (device capture,
edge detection with pluggable backends, at-least-once forwarding, cloud
ingestion, notification, and storage) entirely in logical time, and ships
an evaluation harness for confusion-matrix metrics, latency, and resource
comparisons across backends.
"""

__version__ = "0.1.0"

from .backends import (
    DEFAULT_PROFILES,
    DEFAULT_ROUTES,
    BackendCategory,
    BackendProfile,
    ConfidenceModel,
    DetectorBackend,
    FaceCollection,
    RemoteBackend,
    SimulatedBackend,
    simulate_detections,
)
from .cloud import ApiRequest, ApiResponse, CloudService
from .dataset import (
    DEFAULT_KNOWN_FACES,
    Dataset,
    GeneratorConfig,
    generate_dataset,
    load_manifest,
    save_manifest,
)
from .device import (
    Credential,
    DeviceRecord,
    DeviceRegistry,
    MotionScript,
    load_motion_script,
    run_motion_script,
    script_covering,
)
from .edge import EdgeConfig, EdgePipeline, RetryPolicy, SamplingPolicy
from .harness import (
    ComparisonTable,
    ConfusionCounts,
    ExperimentConfig,
    ExperimentReport,
    LatencyStats,
    MetricsReport,
    Outcome,
    classify_outcome,
    compare_backends,
    compute_metrics,
    f1_score,
    latency_stats,
    run_experiment,
    run_threshold_study,
    tally_frame,
)
from .model import (
    ALTERNATE_THRESHOLD,
    DEFAULT_THRESHOLD,
    AnalyticsRecord,
    Detection,
    EventIdFactory,
    FaceCategory,
    FaceIdentity,
    FrameSample,
    Label,
    MotionEvent,
    ScenarioKind,
    apply_confidence_threshold,
    canonical_json,
    format_event_id,
    parse_event_id,
)
from .transport import CloudClient, FailureInjector, NetworkModel

__all__ = [
    "__version__",
    # model
    "ScenarioKind", "FaceCategory", "Label", "FaceIdentity", "Detection",
    "FrameSample", "MotionEvent", "AnalyticsRecord", "EventIdFactory",
    "format_event_id", "parse_event_id", "apply_confidence_threshold",
    "canonical_json", "DEFAULT_THRESHOLD", "ALTERNATE_THRESHOLD",
    # dataset
    "Dataset", "GeneratorConfig", "generate_dataset", "load_manifest",
    "save_manifest", "DEFAULT_KNOWN_FACES",
    # device
    "DeviceRegistry", "DeviceRecord", "Credential", "MotionScript",
    "load_motion_script", "run_motion_script", "script_covering",
    # backends
    "BackendCategory", "BackendProfile", "ConfidenceModel", "DetectorBackend",
    "SimulatedBackend", "RemoteBackend", "FaceCollection", "simulate_detections",
    "DEFAULT_PROFILES", "DEFAULT_ROUTES",
    # edge
    "EdgeConfig", "EdgePipeline", "RetryPolicy", "SamplingPolicy",
    # cloud + transport
    "CloudService", "ApiRequest", "ApiResponse", "CloudClient", "NetworkModel",
    "FailureInjector",
    # harness
    "Outcome", "ConfusionCounts", "MetricsReport", "LatencyStats",
    "classify_outcome", "tally_frame", "compute_metrics", "f1_score",
    "latency_stats", "ExperimentConfig", "ExperimentReport", "run_experiment",
    "run_threshold_study", "compare_backends", "ComparisonTable",
]
