"""Edge layer: sample frames, run detection, package records, forward.

Frames from different devices may be in flight concurrently; one device's
frames are processed strictly in order, which is what keeps per-device
ingest ordering intact across retries. Backend latency and retry backoff
advance the logical clock instead of sleeping, so latency measurements are
deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .backends import DEFAULT_ROUTES, DetectorBackend
from .errors import (
    DeliveryFailedError,
    DetectionFailedError,
    DoorsimError,
    RoutingError,
    TransientTransportError,
    ValidationError,
)
from .model import (
    DEFAULT_THRESHOLD,
    AnalyticsRecord,
    FrameSample,
    MotionEvent,
    ScenarioKind,
    apply_confidence_threshold,
)
from .transport import CloudClient, IngestAck

__all__ = [
    "SamplingPolicy",
    "RetryPolicy",
    "EdgeConfig",
    "FrameSampler",
    "EdgePipeline",
    "ProcessOutcome",
]


@dataclass(frozen=True)
class SamplingPolicy:
    """Per-device rate limit applied before detection."""

    max_frames_per_event: int = 1
    min_interval_ms: int = 0

    def __post_init__(self) -> None:
        if self.max_frames_per_event < 1:
            raise ValidationError("max_frames_per_event must be >= 1")
        if self.min_interval_ms < 0:
            raise ValidationError("min_interval_ms must be >= 0")


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_ms: int = 100

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValidationError("max_attempts must be >= 1")
        if self.backoff_ms < 0:
            raise ValidationError("backoff_ms must be >= 0")


@dataclass(frozen=True)
class EdgeConfig:
    """Edge deployment configuration; JSON file format mirrors the fields."""

    backend_id: str
    threshold: float = DEFAULT_THRESHOLD
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    sampling: SamplingPolicy = field(default_factory=SamplingPolicy)
    scenario_routing: Mapping[ScenarioKind, str] = field(
        default_factory=lambda: dict(DEFAULT_ROUTES)
    )
    queue_capacity: int = 64

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 100.0:
            raise ValidationError(f"threshold out of [0, 100]: {self.threshold}")
        missing = [k.value for k in ScenarioKind if k not in self.scenario_routing]
        if missing:
            raise ValidationError(f"scenario routing must cover all scenarios; missing {missing}")
        if self.queue_capacity < 1:
            raise ValidationError("queue_capacity must be >= 1")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EdgeConfig":
        if "scenario_routing" in data:
            routing = {ScenarioKind(k): v for k, v in data["scenario_routing"].items()}
        else:
            routing = dict(DEFAULT_ROUTES)
        return cls(
            backend_id=data["backend_id"],
            threshold=float(data.get("threshold", DEFAULT_THRESHOLD)),
            retry=RetryPolicy(**data.get("retry", {})),
            sampling=SamplingPolicy(**data.get("sampling", {})),
            scenario_routing=routing,
            queue_capacity=int(data.get("queue_capacity", 64)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "backend_id": self.backend_id,
            "threshold": self.threshold,
            "retry": {"max_attempts": self.retry.max_attempts,
                      "backoff_ms": self.retry.backoff_ms},
            "sampling": {"max_frames_per_event": self.sampling.max_frames_per_event,
                         "min_interval_ms": self.sampling.min_interval_ms},
            "scenario_routing": {k.value: v for k, v in self.scenario_routing.items()},
            "queue_capacity": self.queue_capacity,
        }


class FrameSampler:
    """Passes frames through unless the policy suppresses them."""

    def __init__(self, policy: SamplingPolicy):
        self.policy = policy
        self._last_passed: dict[str, int] = {}

    def sample(self, event: MotionEvent, frame: FrameSample) -> FrameSample | None:
        if frame.device_id != event.device_id:
            raise RoutingError(
                f"frame {frame.frame_id} from {frame.device_id} "
                f"arrived with event of {event.device_id}"
            )
        last = self._last_passed.get(frame.device_id)
        if last is not None and frame.captured_at - last < self.policy.min_interval_ms:
            return None
        self._last_passed[frame.device_id] = frame.captured_at
        return frame


@dataclass(frozen=True)
class ProcessOutcome:
    """What happened to one motion event at the edge."""

    event: MotionEvent
    record: AnalyticsRecord | None
    ack: IngestAck | None
    sampled: bool
    dead_lettered: bool = False


class EdgePipeline:
    """sample -> analyze -> threshold -> forward, with at-least-once retry.

    Exactly one analytics record is produced per sampled frame regardless
    of how many delivery attempts it takes. Records that exhaust retries
    land in the in-memory dead-letter queue, which can be flushed to JSON
    at shutdown.
    """

    def __init__(self, config: EdgeConfig, backend: DetectorBackend, client: CloudClient):
        if backend.descriptor().backend_id != config.backend_id:
            raise ValidationError(
                f"configured backend {config.backend_id!r} does not match "
                f"{backend.descriptor().backend_id!r}"
            )
        self.config = config
        self.backend = backend
        self.client = client
        self.sampler = FrameSampler(config.sampling)
        self.dead_letters: list[AnalyticsRecord] = []
        # (backend_id, frame_id, request_at, response_at) per detect call
        self.latency_trace: list[tuple[str, str, int, int]] = []

    def analyze(self, event: MotionEvent, frame: FrameSample) -> AnalyticsRecord:
        """Run detection on one frame and package the metadata envelope."""
        try:
            raw = self.backend.detect(frame, frame.scenario)
            latency = self.backend.call_latency_ms(frame)
        except DoorsimError:
            raise
        except Exception as exc:  # backend bug or unavailability
            raise DetectionFailedError(f"detection failed for {frame.frame_id}: {exc}") from exc
        detections = apply_confidence_threshold(raw, self.config.threshold)
        detected_at = frame.captured_at + latency
        self.latency_trace.append(
            (self.config.backend_id, frame.frame_id, frame.captured_at, detected_at)
        )
        return AnalyticsRecord(
            event_id=event.event_id,
            device_id=frame.device_id,
            frame_id=frame.frame_id,
            detections=tuple(detections),
            backend_id=self.config.backend_id,
            captured_at=frame.captured_at,
            detected_at=detected_at,
            threshold_used=self.config.threshold,
        )

    def forward(self, record: AnalyticsRecord, session_token: str) -> IngestAck:
        """Deliver one record, retrying transient faults with logical backoff."""
        at = record.detected_at
        last_error: Exception | None = None
        for attempt in range(self.config.retry.max_attempts):
            try:
                return self.client.ingest(record, session_token, at_ms=at, attempt=attempt)
            except TransientTransportError as exc:
                last_error = exc
                at += self.config.retry.backoff_ms
        self.dead_letters.append(record)
        raise DeliveryFailedError(
            f"delivery failed for {record.event_id} after "
            f"{self.config.retry.max_attempts} attempts: {last_error}"
        )

    def process(self, event: MotionEvent, frame: FrameSample, session_token: str) -> ProcessOutcome:
        """Full edge handling of one motion event."""
        sampled = self.sampler.sample(event, frame)
        if sampled is None:
            return ProcessOutcome(event, None, None, sampled=False)
        record = self.analyze(event, sampled)
        try:
            ack = self.forward(record, session_token)
        except DeliveryFailedError:
            return ProcessOutcome(event, record, None, sampled=True, dead_lettered=True)
        return ProcessOutcome(event, record, ack, sampled=True)

    def flush_dead_letters(self, path: str | Path) -> int:
        """Write the dead-letter queue to a JSON file; returns the count."""
        records = [r.to_dict() for r in self.dead_letters]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(records, fh, sort_keys=True, indent=2)
        return len(records)
