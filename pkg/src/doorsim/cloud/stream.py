"""Ordered ingestion stream and the function dispatcher that drains it.

The stream is append-only and at-least-once: re-ingested event ids get a
fresh sequence number plus a duplicate flag. Deduplication happens on the
consumer side: the dispatcher skips records whose event id it has already
processed, so retried ingests still produce exactly-once effects.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

from ..errors import ValidationError
from ..model import AnalyticsRecord, parse_event_id

__all__ = ["StreamRecord", "IngestStream", "Dispatcher", "DEFAULT_POISON_PASSES"]

# Passes a record may fail before it is moved to the dead-letter queue.
DEFAULT_POISON_PASSES = 3


@dataclass(frozen=True)
class StreamRecord:
    """One stream entry: globally sequenced, partitioned by device."""

    sequence: int
    partition: str
    payload: AnalyticsRecord
    ingested_at: int
    duplicate: bool = False

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "partition": self.partition,
            "payload": self.payload.to_dict(),
            "ingested_at": self.ingested_at,
            "duplicate": self.duplicate,
        }


class IngestStream:
    """Append-only record stream with an atomic global sequence."""

    def __init__(self) -> None:
        self._records: list[StreamRecord] = []
        self._seen_event_ids: set[str] = set()
        self._last_event_seq: dict[str, int] = {}
        self._lock = threading.Lock()

    def append(self, record: AnalyticsRecord, ingested_at: int) -> StreamRecord:
        """Append one record; duplicates are flagged, never suppressed."""
        device_id, event_seq = parse_event_id(record.event_id)
        if device_id != record.device_id:
            raise ValidationError(
                f"event id {record.event_id} does not match device {record.device_id}"
            )
        with self._lock:
            duplicate = record.event_id in self._seen_event_ids
            if not duplicate:
                last = self._last_event_seq.get(device_id)
                if last is not None and event_seq < last:
                    raise ValidationError(
                        f"out-of-order ingest for {device_id}: {event_seq} after {last}"
                    )
                self._last_event_seq[device_id] = event_seq
                self._seen_event_ids.add(record.event_id)
            entry = StreamRecord(
                sequence=len(self._records),
                partition=device_id,
                payload=record,
                ingested_at=ingested_at,
                duplicate=duplicate,
            )
            self._records.append(entry)
        return entry

    def read_from(self, sequence: int) -> list[StreamRecord]:
        with self._lock:
            return self._records[sequence:]

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


Handler = Callable[[StreamRecord], None]


class Dispatcher:
    """Single logical consumer delivering records to registered handlers.

    A record advances the checkpoint only once every handler succeeded for
    it. A failing record is redelivered on the next pass and moved to the
    dead-letter queue after ``poison_passes`` failed passes. Duplicate
    records (flagged by the stream or already-processed event ids) skip the
    handlers but still advance the checkpoint.
    """

    def __init__(self, poison_passes: int = DEFAULT_POISON_PASSES):
        if poison_passes < 1:
            raise ValidationError("poison_passes must be >= 1")
        self._handlers: list[tuple[str, Handler]] = []
        self._poison_passes = poison_passes
        self._processed_event_ids: set[str] = set()
        self._failure_counts: dict[int, int] = {}
        self.checkpoint = 0
        self.dead_letters: list[tuple[StreamRecord, str]] = []
        self._lock = threading.Lock()

    def register(self, name: str, handler: Handler) -> None:
        self._handlers.append((name, handler))

    def run_pass(self, stream: IngestStream) -> int:
        """One dispatch pass. Returns the new checkpoint position."""
        with self._lock:
            for entry in stream.read_from(self.checkpoint):
                if entry.duplicate or entry.payload.event_id in self._processed_event_ids:
                    self.checkpoint = entry.sequence + 1
                    continue
                try:
                    for _, handler in self._handlers:
                        handler(entry)
                except Exception as exc:  # noqa: BLE001 - handler faults are data
                    failures = self._failure_counts.get(entry.sequence, 0) + 1
                    self._failure_counts[entry.sequence] = failures
                    if failures >= self._poison_passes:
                        self.dead_letters.append((entry, repr(exc)))
                        self.checkpoint = entry.sequence + 1
                        continue
                    break
                self._processed_event_ids.add(entry.payload.event_id)
                self.checkpoint = entry.sequence + 1
        return self.checkpoint

    def run_until_current(self, stream: IngestStream, max_passes: int = 1000) -> int:
        """Dispatch passes until the checkpoint reaches the stream head."""
        for _ in range(max_passes):
            if self.run_pass(stream) >= len(stream):
                return self.checkpoint
        raise ValidationError(f"dispatcher did not converge in {max_passes} passes")
