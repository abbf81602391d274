"""Client-side transport: logical network delays over the JSON protocol.

The in-process client speaks the exact wire protocol (paths, bodies,
headers) against a :class:`~doorsim.cloud.CloudService`, while time is
purely logical: a round trip costs two one-way delays plus the server's
service time, with delays drawn as seeded jitter keyed by the message,
never by wall clock. An optional failure injector simulates transient
ingest faults, either dropping the request or losing the acknowledgement
after the server applied it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Mapping

from .cloud.service import ApiRequest, ApiResponse
from .draws import int_draw
from .errors import ProtocolError, TransientTransportError
from .model import AnalyticsRecord, Detection, FrameSample

__all__ = ["NetworkModel", "IngestAck", "FailureInjector", "CloudClient"]

# Response payload field per detection endpoint.
_DETECT_RESPONSE_FIELD = {
    "/detect/faces": "face_matches",
    "/detect/moderation": "moderation_labels",
    "/detect/text": "text_detections",
    "/detect/labels": "labels",
}


@dataclass(frozen=True)
class NetworkModel:
    """One-way delay = base +/- uniform jitter, keyed per message."""

    base_delay_ms: int = 40
    jitter_ms: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.base_delay_ms < 0 or self.jitter_ms < 0:
            raise ValueError("delays must be non-negative")
        if self.jitter_ms > self.base_delay_ms:
            raise ValueError("jitter must not exceed the base delay")

    def one_way_ms(self, *key: object) -> int:
        if self.jitter_ms == 0:
            return self.base_delay_ms
        return self.base_delay_ms + int_draw(
            -self.jitter_ms, self.jitter_ms, "net", self.seed, *key
        )

    def to_dict(self) -> dict[str, int]:
        return {"base_delay_ms": self.base_delay_ms, "jitter_ms": self.jitter_ms}


@dataclass(frozen=True)
class IngestAck:
    """Successful delivery: the cloud sequence number and logical times."""

    sequence: int
    duplicate: bool
    ingested_at: int
    acked_at: int
    attempts: int


class FailureInjector:
    """Seeded transient-fault model for the ingest path.

    ``drop`` faults lose the request before the server sees it;
    ``ack_lost`` faults let the server apply the ingest but lose the
    response, so the retry produces a duplicate.
    """

    def __init__(self, probability: float, seed: int = 0, ack_lost_fraction: float = 0.5):
        if not 0.0 <= probability <= 1.0:
            raise ValueError("probability must be in [0, 1]")
        self.probability = probability
        self._rng = random.Random(seed)
        self._ack_lost_fraction = ack_lost_fraction

    def next_fault(self) -> str | None:
        if self._rng.random() >= self.probability:
            return None
        return "ack_lost" if self._rng.random() < self._ack_lost_fraction else "drop"


class CloudClient:
    """In-process protocol client with deterministic logical latency."""

    def __init__(
        self,
        service,
        network: NetworkModel | None = None,
        failure_injector: FailureInjector | None = None,
    ):
        self._service = service
        self.network = network or NetworkModel()
        self.failure_injector = failure_injector

    # -- raw protocol ------------------------------------------------------

    def call(
        self,
        method: str,
        path: str,
        body: Mapping[str, Any] | None = None,
        headers: Mapping[str, str] | None = None,
        query: Mapping[str, str] | None = None,
        at_ms: int = 0,
        delay_key: object = "",
    ) -> tuple[ApiResponse, int]:
        """One round trip. Returns (response, logical response time)."""
        arrive = at_ms + self.network.one_way_ms("c2s", delay_key)
        request = ApiRequest(
            method=method,
            path=path,
            headers={**(headers or {}), "x-sim-time": str(arrive)},
            body=body,
            query=query or {},
        )
        response = self._service.handle(request)
        done = arrive + self.network.one_way_ms("s2c", delay_key)
        return response, done

    def _data(self, response: ApiResponse) -> Mapping[str, Any]:
        body = response.body
        if not body.get("ok", False):
            error = body.get("error", {})
            raise ProtocolError(
                f"{error.get('code', 'error')}: {error.get('message', 'request failed')}"
            )
        if "data" not in body:
            raise ProtocolError("response missing data")
        return body["data"]

    # -- typed endpoints -----------------------------------------------------

    def register_device(self, device_id: str, attributes: Mapping[str, str] | None = None,
                        at_ms: int = 0) -> tuple[Mapping[str, Any], str]:
        response, _ = self.call(
            "POST", "/devices/register",
            {"device_id": device_id, "attributes": dict(attributes or {})},
            at_ms=at_ms, delay_key=f"register:{device_id}",
        )
        data = self._data(response)
        return data["record"], data["secret"]

    def authenticate(self, device_id: str, secret: str, at_ms: int = 0) -> str:
        response, _ = self.call(
            "POST", "/devices/auth", {"device_id": device_id, "secret": secret},
            at_ms=at_ms, delay_key=f"auth:{device_id}",
        )
        return self._data(response)["session_token"]

    def detect(self, path: str, frame: FrameSample, collection_id: str = "default") -> list[Detection]:
        response, _ = self.call(
            "POST", path, {"frame": frame.to_dict(), "collection_id": collection_id},
            at_ms=frame.captured_at, delay_key=f"detect:{frame.frame_id}",
        )
        data = self._data(response)
        field_name = _DETECT_RESPONSE_FIELD.get(path)
        if field_name is None or field_name not in data:
            raise ProtocolError(f"unexpected detection response for {path}: {list(data)}")
        return [Detection.from_dict(d) for d in data[field_name]]

    def round_trip_ms(self, frame_id: str, service_time_ms: int) -> int:
        """Logical latency of a detect call for this frame."""
        key = f"detect:{frame_id}"
        return (
            self.network.one_way_ms("c2s", key)
            + service_time_ms
            + self.network.one_way_ms("s2c", key)
        )

    def ingest(self, record: AnalyticsRecord, session_token: str,
               at_ms: int, attempt: int = 0) -> IngestAck:
        """One delivery attempt; transient faults surface as retryable errors."""
        fault = self.failure_injector.next_fault() if self.failure_injector else None
        key = f"ingest:{record.event_id}:{attempt}"
        if fault == "drop":
            raise TransientTransportError(f"request lost for {record.event_id}")
        response, done = self.call(
            "POST", "/ingest", {"record": record.to_dict()},
            headers={"x-session-token": session_token},
            at_ms=at_ms, delay_key=key,
        )
        data = self._data(response)
        if fault == "ack_lost":
            raise TransientTransportError(f"ack lost for {record.event_id}")
        return IngestAck(
            sequence=data["sequence"],
            duplicate=data["duplicate"],
            ingested_at=data["ingested_at"],
            acked_at=done,
            attempts=attempt + 1,
        )

    def enroll_face(self, identity: str, category: str,
                    collection_id: str = "default", at_ms: int = 0) -> Mapping[str, Any]:
        response, _ = self.call(
            "POST", "/faces/enroll",
            {"collection_id": collection_id, "identity": identity, "category": category},
            at_ms=at_ms, delay_key=f"enroll:{identity}",
        )
        return self._data(response)

    def query(self, body: Mapping[str, Any], at_ms: int = 0) -> Mapping[str, Any]:
        response, _ = self.call("POST", "/query", body, at_ms=at_ms, delay_key="query")
        return self._data(response)

    def activities(self, device_id: str, from_ms: int, to_ms: int) -> list[Mapping[str, Any]]:
        response, _ = self.call(
            "GET", "/activities", None,
            query={"device": device_id, "from": str(from_ms), "to": str(to_ms)},
            delay_key=f"activities:{device_id}",
        )
        return list(self._data(response)["records"])
