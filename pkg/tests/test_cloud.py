import pytest

from doorsim.cloud import CloudService
from doorsim.cloud.notify import NotificationHub, SubscriptionFilter, summarize_record
from doorsim.cloud.queries import QueryKind, QueryRequest, answer_query
from doorsim.cloud.stores import BlobStore, CustomLabelJobs, MetadataStore
from doorsim.cloud.stream import Dispatcher, IngestStream
from doorsim.errors import ConflictError, NotFoundError, ValidationError
from doorsim.model import (
    AnalyticsRecord,
    Detection,
    FaceCategory,
    FaceIdentity,
    Label,
    ScenarioKind,
)


def record(seq=0, device="door-1", names=("dog",), at=0, kind=ScenarioKind.ANIMAL_DETECTION,
           identity=None):
    detections = tuple(
        Detection(Label(n, kind), 95.0, identity=identity if kind is ScenarioKind.FACE_RECOGNITION else None)
        for n in names
    )
    return AnalyticsRecord(
        event_id=f"{device}:{seq}",
        device_id=device,
        frame_id=f"frame-{device}-{seq}",
        detections=detections,
        backend_id="aws-saas",
        captured_at=at,
        detected_at=at + 100,
        threshold_used=90.0,
    )


class TestIngestStream:
    def test_first_sequence_is_zero(self):
        stream = IngestStream()
        assert stream.append(record(0), ingested_at=5).sequence == 0

    def test_sequences_are_monotone(self):
        stream = IngestStream()
        assert stream.append(record(0), 0).sequence == 0
        assert stream.append(record(1), 1).sequence == 1

    def test_reingest_flags_duplicate_with_new_sequence(self):
        stream = IngestStream()
        stream.append(record(0), 0)
        entry = stream.append(record(0), 1)
        assert entry.sequence == 1
        assert entry.duplicate is True

    def test_partitioned_by_device(self):
        stream = IngestStream()
        stream.append(record(0, device="door-1"), 0)
        entry = stream.append(record(0, device="door-2"), 0)
        assert entry.partition == "door-2"
        assert entry.duplicate is False


class TestDispatcher:
    def make(self, poison_passes=3):
        stream = IngestStream()
        store = MetadataStore()
        hub = NotificationHub()
        hub.subscribe("user")
        dispatcher = Dispatcher(poison_passes=poison_passes)
        dispatcher.register("persist_metadata", lambda e: store.put(e.payload))
        dispatcher.register("publish_notification", lambda e: hub.publish(e.payload, e.ingested_at))
        return stream, store, hub, dispatcher

    def test_happy_path_single_pass(self):
        stream, store, hub, dispatcher = self.make()
        for i in range(3):
            stream.append(record(i), i)
        assert dispatcher.run_pass(stream) == 3
        assert len(store) == 3
        assert len(hub.subscription("user").delivery_log) == 3

    def test_handler_failure_redelivers_without_gaps(self):
        stream, store, hub, dispatcher = self.make()
        fails = {"left": 1}

        def flaky(entry):
            if entry.sequence == 2 and fails["left"]:
                fails["left"] -= 1
                raise RuntimeError("transient handler fault")

        dispatcher.register("flaky", flaky)
        for i in range(3):
            stream.append(record(i), i)
        assert dispatcher.run_pass(stream) == 2  # stopped at the failing record
        assert dispatcher.run_pass(stream) == 3
        # after 2 passes: all three persisted, no gaps, one notification each
        assert len(store) == 3
        assert [r.event_id for r in store.get_activities("door-1", 0, 10)] == [
            "door-1:0", "door-1:1", "door-1:2",
        ]
        assert len(hub.subscription("user").delivery_log) == 3

    def test_duplicate_records_skip_handlers_but_advance(self):
        stream, store, hub, dispatcher = self.make()
        stream.append(record(0), 0)
        stream.append(record(0), 1)
        assert dispatcher.run_pass(stream) == 2
        assert len(store) == 1
        assert len(hub.subscription("user").delivery_log) == 1

    def test_poison_record_dead_letters_after_n_passes(self):
        stream, store, hub, dispatcher = self.make(poison_passes=3)
        dispatcher.register("poison", lambda e: (_ for _ in ()).throw(RuntimeError("boom")))
        stream.append(record(0), 0)
        stream.append(record(1), 1)
        # a poisoned head blocks the stream for poison_passes passes, then
        # moves to the dead-letter queue and the next record gets its turn
        for _ in range(3):
            dispatcher.run_pass(stream)
        assert len(dispatcher.dead_letters) == 1
        assert dispatcher.checkpoint == 1
        for _ in range(2):
            dispatcher.run_pass(stream)
        assert len(dispatcher.dead_letters) == 2
        assert dispatcher.checkpoint == 2

    def test_notification_lands_in_same_pass_as_persistence(self):
        # "real time" budget: the notification carries the ingest timestamp
        stream, store, hub, dispatcher = self.make()
        stream.append(record(0), ingested_at=4321)
        dispatcher.run_pass(stream)
        assert len(store) == 1
        (notification,) = hub.subscription("user").delivery_log
        assert notification.at == 4321

    def test_redelivery_does_not_double_notify(self):
        stream, store, hub, dispatcher = self.make()
        fails = {"left": 1}

        def after_notify(entry):
            # fails after persist+notify already ran for this record
            if fails["left"]:
                fails["left"] -= 1
                raise RuntimeError("post-notify fault")

        dispatcher.register("zz_after", after_notify)
        stream.append(record(0), 0)
        dispatcher.run_pass(stream)
        dispatcher.run_pass(stream)
        assert len(hub.subscription("user").delivery_log) == 1


class TestNotifications:
    def test_single_matching_subscriber(self):
        hub = NotificationHub()
        hub.subscribe("user")
        assert len(hub.publish(record(0), at=10)) == 1

    def test_device_filter(self):
        hub = NotificationHub()
        hub.subscribe("user", SubscriptionFilter(devices=frozenset({"door-2"})))
        assert hub.publish(record(0, device="door-1"), at=0) == []

    def test_scenario_filter(self):
        hub = NotificationHub()
        hub.subscribe("user", SubscriptionFilter(scenarios=frozenset({ScenarioKind.UNSAFE_CONTENT})))
        assert hub.publish(record(0, names=("dog",)), at=0) == []
        gun = record(1, names=("gun",), kind=ScenarioKind.UNSAFE_CONTENT)
        assert len(hub.publish(gun, at=0)) == 1

    def test_zero_subscribers_is_noop(self):
        hub = NotificationHub()
        assert hub.publish(record(0), at=0) == []

    def test_unknown_face_summary_mentions_unknown(self):
        rec = record(0, names=("face",), kind=ScenarioKind.FACE_RECOGNITION,
                     identity=FaceIdentity("mallory", FaceCategory.UNKNOWN))
        assert "unknown" in summarize_record(rec).lower()

    def test_known_face_summary_names_identity_and_category(self):
        rec = record(0, names=("face",), kind=ScenarioKind.FACE_RECOGNITION,
                     identity=FaceIdentity("alice", FaceCategory.FAMILY))
        summary = summarize_record(rec)
        assert "Known face: alice (Family)" == summary

    def test_empty_detections_still_summarized(self):
        assert summarize_record(record(0, names=())) != ""


class TestMetadataStore:
    def test_put_is_idempotent(self):
        store = MetadataStore()
        store.put(record(0))
        store.put(record(0))
        assert len(store) == 1

    def test_range_excluding_record_time(self):
        store = MetadataStore()
        store.put(record(0, at=5000))
        assert store.get_activities("door-1", 0, 4999) == []

    def test_inverted_range_rejected(self):
        with pytest.raises(ValidationError):
            MetadataStore().get_activities("door-1", 10, 5)

    def test_full_range_matches_naive_oracle(self):
        store = MetadataStore()
        records = [record(i, at=i * 1000) for i in range(10)]
        for r in reversed(records):  # insertion order must not matter
            store.put(r)
        got = store.get_activities("door-1", 0, 10_000)

        naive = sorted(
            (r for r in records if 0 <= r.captured_at <= 10_000),
            key=lambda r: int(r.event_id.split(":")[1]),
        )
        assert got == naive

    def test_devices_are_isolated(self):
        store = MetadataStore()
        store.put(record(0, device="door-1"))
        store.put(record(0, device="door-2"))
        assert len(store.get_activities("door-1", 0, 10)) == 1


class TestBlobStore:
    def test_round_trip(self):
        blobs = BlobStore()
        ref = blobs.put(b"front-porch-clip")
        assert blobs.get(ref) == b"front-porch-clip"

    def test_content_addressing(self):
        blobs = BlobStore()
        assert blobs.put(b"same") == blobs.put(b"same")
        assert len(blobs) == 1

    def test_unknown_ref_not_found(self):
        with pytest.raises(NotFoundError):
            BlobStore().get("0" * 64)


class TestQueries:
    def test_latest_activity_mentions_unsafe_content(self):
        store = MetadataStore()
        store.put(record(0, names=("gun",), kind=ScenarioKind.UNSAFE_CONTENT, at=100))
        answer = answer_query(
            QueryRequest(QueryKind.LATEST_ACTIVITY, "door-1"), store, now_ms=1000
        )
        assert "unsafe content" in answer.summary
        assert len(answer.records) == 1

    def test_empty_store_says_no_activity(self):
        answer = answer_query(
            QueryRequest(QueryKind.LATEST_ACTIVITY, "door-1"), MetadataStore(), now_ms=0
        )
        assert "No activity" in answer.summary
        assert answer.records == ()

    def test_daily_snapshot_counts_match_naive_oracle(self):
        store = MetadataStore()
        rows = []
        for i in range(3):
            rows.append(record(i, names=("face",), kind=ScenarioKind.FACE_RECOGNITION,
                               at=1000 + i,
                               identity=FaceIdentity("alice", FaceCategory.FAMILY)))
        for i in range(3, 5):
            rows.append(record(i, names=("dog",), at=1000 + i))
        for r in rows:
            store.put(r)

        answer = answer_query(
            QueryRequest(QueryKind.DAILY_SNAPSHOT, "door-1"), store, now_ms=10_000
        )

        naive = {}
        for r in rows:
            key = r.detections[0].label.kind.value if r.detections else "none"
            naive[key] = naive.get(key, 0) + 1
        assert answer.counts == naive
        assert answer.counts == {"face_recognition": 3, "animal_detection": 2}

    def test_daily_snapshot_is_last_24h_only(self):
        store = MetadataStore()
        day = 24 * 60 * 60 * 1000
        store.put(record(0, at=10))
        store.put(record(1, at=day + 5000))
        answer = answer_query(
            QueryRequest(QueryKind.DAILY_SNAPSHOT, "door-1"), store, now_ms=day + 10_000
        )
        assert sum(answer.counts.values()) == 1

    def test_range_query_requires_range(self):
        with pytest.raises(ValidationError):
            QueryRequest(QueryKind.RANGE_QUERY, "door-1")
        with pytest.raises(ValidationError):
            QueryRequest(QueryKind.RANGE_QUERY, "door-1", range=(10, 5))

    def test_range_query_returns_raw_records(self):
        store = MetadataStore()
        store.put(record(0, at=100))
        store.put(record(1, at=200))
        answer = answer_query(
            QueryRequest(QueryKind.RANGE_QUERY, "door-1", range=(0, 150)), store, now_ms=0
        )
        assert len(answer.records) == 1


class TestCustomLabels:
    def test_register_job(self):
        jobs = CustomLabelJobs()
        job = jobs.create("license-plates", 200)
        assert job.status == "registered"
        assert jobs.get("license-plates").example_count == 200

    def test_duplicate_name_conflicts(self):
        jobs = CustomLabelJobs()
        jobs.create("license-plates", 200)
        with pytest.raises(ConflictError):
            jobs.create("license-plates", 300)

    def test_zero_examples_rejected(self):
        with pytest.raises(ValidationError):
            CustomLabelJobs().create("x", 0)

    def test_status_never_advances(self):
        jobs = CustomLabelJobs()
        jobs.create("a", 10)
        assert jobs.get("a").status == "registered"


class TestServiceWiring:
    def test_ingest_requires_session_service_level(self):
        from doorsim.cloud.service import ApiRequest

        service = CloudService(seed=0)
        response = service.handle(ApiRequest("POST", "/ingest", body={"record": record(0).to_dict()}))
        assert response.status == 401
        assert response.body["ok"] is False

    def test_session_cannot_ingest_for_other_device(self):
        from doorsim.cloud.service import ApiRequest

        service = CloudService(seed=0)
        reg = service.handle(ApiRequest("POST", "/devices/register", body={"device_id": "door-9"}))
        auth = service.handle(ApiRequest("POST", "/devices/auth", body={
            "device_id": "door-9", "secret": reg.body["data"]["secret"]}))
        token = auth.body["data"]["session_token"]
        response = service.handle(ApiRequest(
            "POST", "/ingest",
            headers={"x-session-token": token},
            body={"record": record(0, device="door-1").to_dict()},
        ))
        assert response.status == 401
