"""Key-value metadata store, content-addressed blob store, training stub."""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

from ..errors import ConflictError, NotFoundError, ValidationError
from ..model import AnalyticsRecord, parse_event_id

__all__ = ["MetadataStore", "BlobStore", "CustomLabelJobs", "CustomLabelJob"]


class MetadataStore:
    """Analytics records keyed by (device_id, event_id).

    ``put`` is idempotent on the key, so duplicate ingests never create a
    second stored record. Range reads return one device's records ordered
    by its event sequence.
    """

    def __init__(self) -> None:
        self._records: dict[tuple[str, str], AnalyticsRecord] = {}
        self._lock = threading.Lock()

    def put(self, record: AnalyticsRecord) -> None:
        with self._lock:
            self._records.setdefault((record.device_id, record.event_id), record)

    def get_activities(self, device_id: str, from_ms: int, to_ms: int) -> list[AnalyticsRecord]:
        """Records of one device captured within [from_ms, to_ms]."""
        if from_ms > to_ms:
            raise ValidationError(f"inverted range: {from_ms} > {to_ms}")
        with self._lock:
            matches = [
                record
                for (dev, _), record in self._records.items()
                if dev == device_id and from_ms <= record.captured_at <= to_ms
            ]
        matches.sort(key=lambda r: parse_event_id(r.event_id)[1])
        return matches

    def all_records(self) -> list[AnalyticsRecord]:
        with self._lock:
            records = list(self._records.values())
        records.sort(key=lambda r: (r.device_id, parse_event_id(r.event_id)[1]))
        return records

    def latest(self, device_id: str | None = None) -> AnalyticsRecord | None:
        """Most recently captured record, optionally restricted to a device."""
        with self._lock:
            candidates = [
                record
                for (dev, _), record in self._records.items()
                if device_id is None or dev == device_id
            ]
        if not candidates:
            return None
        return max(candidates, key=lambda r: (r.captured_at, parse_event_id(r.event_id)[1]))

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


class BlobStore:
    """Content-addressed bytes: the ref is the SHA-256 of the payload."""

    def __init__(self) -> None:
        self._blobs: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def put(self, data: bytes) -> str:
        ref = hashlib.sha256(data).hexdigest()
        with self._lock:
            self._blobs[ref] = data
        return ref

    def get(self, ref: str) -> bytes:
        with self._lock:
            try:
                return self._blobs[ref]
            except KeyError:
                raise NotFoundError(f"unknown blob ref: {ref}") from None

    def __len__(self) -> int:
        with self._lock:
            return len(self._blobs)


@dataclass(frozen=True)
class CustomLabelJob:
    name: str
    example_count: int
    status: str
    created_at: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "example_count": self.example_count,
            "status": self.status,
            "created_at": self.created_at,
        }


class CustomLabelJobs:
    """Custom-label training stub: jobs register and never advance."""

    def __init__(self) -> None:
        self._jobs: dict[str, CustomLabelJob] = {}
        self._lock = threading.Lock()

    def create(self, name: str, example_count: int, at: int = 0) -> CustomLabelJob:
        if not name:
            raise ValidationError("job name must be non-empty")
        if example_count <= 0:
            raise ValidationError("example_count must be > 0")
        with self._lock:
            if name in self._jobs:
                raise ConflictError(f"custom-label job already exists: {name}")
            job = CustomLabelJob(name=name, example_count=example_count,
                                 status="registered", created_at=at)
            self._jobs[name] = job
        return job

    def get(self, name: str) -> CustomLabelJob:
        with self._lock:
            try:
                return self._jobs[name]
            except KeyError:
                raise NotFoundError(f"unknown custom-label job: {name}") from None
