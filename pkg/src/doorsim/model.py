"""Shared domain vocabulary: frames, events, detections, and records.

All types here are immutable values, safe to copy between pipeline stages.
Timestamps are logical simulation milliseconds, never wall clock, so any
run can be replayed exactly.

Every type serializes to a flat JSON object with snake_case field names;
``canonical_json`` is the single encoder used for wire payloads, reports,
and golden files.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping

from .errors import ConflictError, ValidationError

__all__ = [
    "ScenarioKind",
    "FaceCategory",
    "Label",
    "FaceIdentity",
    "Detection",
    "FrameSample",
    "MotionEvent",
    "AnalyticsRecord",
    "EventIdFactory",
    "format_event_id",
    "parse_event_id",
    "apply_confidence_threshold",
    "canonical_json",
    "DEFAULT_THRESHOLD",
    "ALTERNATE_THRESHOLD",
    "FACE_LABEL",
    "DEFAULT_VOCABULARY",
]

# Confidence is a percentage in [0, 100]; both study thresholds are
# first-class config values.
DEFAULT_THRESHOLD = 90.0
ALTERNATE_THRESHOLD = 70.0

FACE_LABEL = "face"


class ScenarioKind(enum.Enum):
    """The five supported analytics scenarios."""

    FACE_RECOGNITION = "face_recognition"
    UNSAFE_CONTENT = "unsafe_content"
    ANIMAL_DETECTION = "animal_detection"
    NOTEWORTHY_VEHICLE = "noteworthy_vehicle"
    MULTI_OBJECT = "multi_object"


class FaceCategory(enum.Enum):
    FAMILY = "family"
    FRIEND = "friend"
    VISITOR = "visitor"
    UNKNOWN = "unknown"


# Default label vocabulary per scenario, used by the dataset generator and
# for spurious (false-positive) detections.
DEFAULT_VOCABULARY: Mapping[ScenarioKind, tuple[str, ...]] = {
    ScenarioKind.FACE_RECOGNITION: (FACE_LABEL,),
    ScenarioKind.UNSAFE_CONTENT: ("gun", "knife"),
    ScenarioKind.ANIMAL_DETECTION: ("dog", "cat"),
    ScenarioKind.NOTEWORTHY_VEHICLE: ("fedex", "usps", "ambulance", "dhl"),
    ScenarioKind.MULTI_OBJECT: ("person", "dog", "package"),
}


@dataclass(frozen=True)
class Label:
    """A canonical lowercase detection label bound to one scenario."""

    name: str
    kind: ScenarioKind

    def __post_init__(self) -> None:
        if not self.name:
            raise ValidationError("label name must be non-empty")
        if self.name != self.name.strip().lower():
            raise ValidationError(f"label name must be a lowercase token: {self.name!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "kind": self.kind.value}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Label":
        return cls(name=data["name"], kind=ScenarioKind(data["kind"]))


@dataclass(frozen=True)
class FaceIdentity:
    """An opaque identity token plus the category it resolved to."""

    token: str
    category: FaceCategory


@dataclass(frozen=True)
class Detection:
    """One labeled output of a detection backend.

    ``confidence`` is a percentage in [0, 100]. ``identity`` is present only
    for face-recognition labels. ``box`` is a normalized (x, y, w, h)
    rectangle in [0, 1]^4 when a backend chooses to emit one.
    """

    label: Label
    confidence: float
    identity: FaceIdentity | None = None
    box: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 100.0:
            raise ValidationError(f"confidence out of [0, 100]: {self.confidence}")
        if self.identity is not None and self.label.kind is not ScenarioKind.FACE_RECOGNITION:
            raise ValidationError("identity is only valid on face-recognition detections")
        if self.box is not None:
            if len(self.box) != 4 or any(not 0.0 <= v <= 1.0 for v in self.box):
                raise ValidationError(f"box must be four values in [0, 1]: {self.box!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label.name,
            "kind": self.label.kind.value,
            "confidence": self.confidence,
            "identity": None if self.identity is None else self.identity.token,
            "category": None if self.identity is None else self.identity.category.value,
            "box": None if self.box is None else list(self.box),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Detection":
        identity = None
        if data.get("identity") is not None:
            identity = FaceIdentity(data["identity"], FaceCategory(data["category"]))
        box = data.get("box")
        return cls(
            label=Label(data["label"], ScenarioKind(data["kind"])),
            confidence=float(data["confidence"]),
            identity=identity,
            box=None if box is None else tuple(box),
        )


@dataclass(frozen=True)
class FrameSample:
    """A unit of captured media.

    No pixels exist in this simulator: ``truth`` carries the frame's latent
    ground truth instead. Only detector backends may read it; the pipeline
    treats frames as opaque payloads.
    """

    frame_id: str
    device_id: str
    captured_at: int
    truth: frozenset[Label]
    scenario: ScenarioKind
    truth_identity: str | None = None

    def stamped(self, device_id: str, captured_at: int) -> "FrameSample":
        """Copy of this frame bound to an emitting device and capture time."""
        return replace(self, device_id=device_id, captured_at=captured_at)

    def to_dict(self) -> dict[str, Any]:
        return {
            "frame_id": self.frame_id,
            "device_id": self.device_id,
            "captured_at": self.captured_at,
            "scenario": self.scenario.value,
            "truth_labels": sorted(label.name for label in self.truth),
            "truth_identity": self.truth_identity,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FrameSample":
        scenario = ScenarioKind(data["scenario"])
        truth = frozenset(Label(name, scenario) for name in data.get("truth_labels", []))
        return cls(
            frame_id=data["frame_id"],
            device_id=data["device_id"],
            captured_at=int(data.get("captured_at", 0)),
            truth=truth,
            scenario=scenario,
            truth_identity=data.get("truth_identity"),
        )


@dataclass(frozen=True)
class MotionEvent:
    """A motion trigger emitted by one device."""

    device_id: str
    at: int
    event_id: str

    def to_dict(self) -> dict[str, Any]:
        return {"device_id": self.device_id, "at": self.at, "event_id": self.event_id}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MotionEvent":
        return cls(device_id=data["device_id"], at=int(data["at"]),
                   event_id=data["event_id"])


@dataclass(frozen=True)
class AnalyticsRecord:
    """The metadata envelope shipped from the edge to the cloud."""

    event_id: str
    device_id: str
    frame_id: str
    detections: tuple[Detection, ...]
    backend_id: str
    captured_at: int
    detected_at: int
    threshold_used: float

    def __post_init__(self) -> None:
        if self.detected_at < self.captured_at:
            raise ValidationError("detected_at must be >= captured_at")
        for detection in self.detections:
            if detection.confidence < self.threshold_used:
                raise ValidationError(
                    f"detection below threshold {self.threshold_used}: {detection}"
                )

    def to_dict(self) -> dict[str, Any]:
        return {
            "event_id": self.event_id,
            "device_id": self.device_id,
            "frame_id": self.frame_id,
            "detections": [d.to_dict() for d in self.detections],
            "backend_id": self.backend_id,
            "captured_at": self.captured_at,
            "detected_at": self.detected_at,
            "threshold_used": self.threshold_used,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AnalyticsRecord":
        return cls(
            event_id=data["event_id"],
            device_id=data["device_id"],
            frame_id=data["frame_id"],
            detections=tuple(Detection.from_dict(d) for d in data["detections"]),
            backend_id=data["backend_id"],
            captured_at=int(data["captured_at"]),
            detected_at=int(data["detected_at"]),
            threshold_used=float(data["threshold_used"]),
        )


def format_event_id(device_id: str, sequence: int) -> str:
    """Deterministic event id: ``"<device_id>:<sequence>"``."""
    if sequence < 0:
        raise ValidationError("event sequence must be non-negative")
    return f"{device_id}:{sequence}"


def parse_event_id(event_id: str) -> tuple[str, int]:
    """Inverse of :func:`format_event_id`."""
    device_id, _, seq = event_id.rpartition(":")
    if not device_id or not seq.isdigit():
        raise ValidationError(f"malformed event id: {event_id!r}")
    return device_id, int(seq)


class EventIdFactory:
    """Issues event ids, enforcing per-device sequence uniqueness.

    Reusing a sequence number for a device signals a caller bug and raises.
    """

    def __init__(self) -> None:
        self._issued: dict[str, set[int]] = {}
        self._lock = threading.Lock()

    def new_event_id(self, device_id: str, sequence: int) -> str:
        event_id = format_event_id(device_id, sequence)
        with self._lock:
            issued = self._issued.setdefault(device_id, set())
            if sequence in issued:
                raise ConflictError(f"sequence {sequence} already issued for {device_id}")
            issued.add(sequence)
        return event_id

    def next_event_id(self, device_id: str) -> str:
        """Issue the next unused sequence for the device."""
        with self._lock:
            issued = self._issued.setdefault(device_id, set())
            sequence = max(issued) + 1 if issued else 0
            issued.add(sequence)
        return format_event_id(device_id, sequence)


def apply_confidence_threshold(
    detections: Iterable[Detection], threshold: float
) -> list[Detection]:
    """Detections with confidence >= threshold, order preserved."""
    if not 0.0 <= threshold <= 100.0:
        raise ValidationError(f"threshold out of [0, 100]: {threshold}")
    return [d for d in detections if d.confidence >= threshold]


def canonical_json(obj: Any) -> str:
    """The one JSON encoding used on the wire and in reports.

    Sorted keys and fixed separators make byte-level comparison meaningful.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
