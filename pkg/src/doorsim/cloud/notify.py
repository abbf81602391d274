"""Push-notification fan-out with filtered subscriptions.

Delivery is exactly-once per (subscriber, event): the hub remembers which
event ids each subscriber has seen, so dispatcher redeliveries after a
partial handler failure never double-notify.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from ..model import AnalyticsRecord, FaceCategory, ScenarioKind

__all__ = ["Notification", "SubscriptionFilter", "Subscription", "NotificationHub", "summarize_record"]

_KIND_PHRASE = {
    ScenarioKind.FACE_RECOGNITION: "face",
    ScenarioKind.UNSAFE_CONTENT: "unsafe content",
    ScenarioKind.ANIMAL_DETECTION: "animal",
    ScenarioKind.NOTEWORTHY_VEHICLE: "noteworthy vehicle",
    ScenarioKind.MULTI_OBJECT: "object",
}


@dataclass(frozen=True)
class Notification:
    event_id: str
    device_id: str
    summary: str
    at: int

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "device_id": self.device_id,
            "summary": self.summary,
            "at": self.at,
        }


@dataclass(frozen=True)
class SubscriptionFilter:
    """Optional device/scenario predicate; None matches everything."""

    devices: frozenset[str] | None = None
    scenarios: frozenset[ScenarioKind] | None = None

    def matches(self, record: AnalyticsRecord) -> bool:
        if self.devices is not None and record.device_id not in self.devices:
            return False
        if self.scenarios is not None:
            kinds = {d.label.kind for d in record.detections}
            if not kinds & self.scenarios:
                return False
        return True


@dataclass
class Subscription:
    subscriber_id: str
    filter: SubscriptionFilter = field(default_factory=SubscriptionFilter)
    delivery_log: list[Notification] = field(default_factory=list)


def summarize_record(record: AnalyticsRecord) -> str:
    """Human sentence naming the record's detections; never empty."""
    parts: list[str] = []
    for detection in record.detections:
        if detection.identity is not None:
            if detection.identity.category is FaceCategory.UNKNOWN:
                parts.append(f"Unknown face ({detection.identity.token})")
            else:
                parts.append(
                    f"Known face: {detection.identity.token} "
                    f"({detection.identity.category.value.title()})"
                )
        else:
            phrase = _KIND_PHRASE[detection.label.kind]
            parts.append(f"Detected {phrase}: {detection.label.name}")
    if not parts:
        return f"Motion at {record.device_id}: nothing recognized"
    return "; ".join(parts)


class NotificationHub:
    """Fan-out of one notification per matching subscription per event."""

    def __init__(self) -> None:
        self._subscriptions: dict[str, Subscription] = {}
        self._delivered: set[tuple[str, str]] = set()
        self._lock = threading.Lock()

    def subscribe(
        self, subscriber_id: str, filter: SubscriptionFilter | None = None
    ) -> Subscription:
        with self._lock:
            subscription = Subscription(subscriber_id, filter or SubscriptionFilter())
            self._subscriptions[subscriber_id] = subscription
        return subscription

    def publish(self, record: AnalyticsRecord, at: int) -> list[Notification]:
        """Deliver to every matching subscription; zero subscribers is a no-op."""
        summary = summarize_record(record)
        delivered = []
        with self._lock:
            for subscription in self._subscriptions.values():
                key = (subscription.subscriber_id, record.event_id)
                if key in self._delivered:
                    continue
                if not subscription.filter.matches(record):
                    continue
                notification = Notification(
                    event_id=record.event_id,
                    device_id=record.device_id,
                    summary=summary,
                    at=at,
                )
                subscription.delivery_log.append(notification)
                self._delivered.add(key)
                delivered.append(notification)
        return delivered

    def subscription(self, subscriber_id: str) -> Subscription:
        with self._lock:
            return self._subscriptions[subscriber_id]
