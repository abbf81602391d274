"""Datasets and the device layer: manifests, identity, motion triggers.

Every simulation starts from a labeled manifest (no pixels anywhere), and
no frame leaves a device without a registered identity and a live session.
"""

from doorsim import (
    DeviceRegistry,
    GeneratorConfig,
    MotionScript,
    ScenarioKind,
    generate_dataset,
    run_motion_script,
)
from doorsim.dataset import Dataset

# --- fabricate a small labeled dataset --------------------------------------
config = GeneratorConfig(
    scenarios=(ScenarioKind.ANIMAL_DETECTION, ScenarioKind.FACE_RECOGNITION),
    positives=5,
    negatives=3,
    seed=42,
)
frames = generate_dataset(config)
dataset = Dataset(frames)
print(f"generated {len(dataset)} frames for devices {dataset.device_ids}")
for frame in list(dataset)[:3]:
    truth = sorted(label.name for label in frame.truth) or ["<negative frame>"]
    print(f"  {frame.frame_id}: scenario={frame.scenario.value} truth={truth}")

# --- register a device and prove its identity --------------------------------
registry = DeviceRegistry()
record, credential = registry.register("door-1", {"location": "front"})
print(f"\nregistered {record.device_id}, fingerprint {record.credential_fingerprint[:16]}...")

token = registry.authenticate("door-1", credential.secret)
print(f"session token {token[:16]}... (required by cloud ingest)")

try:
    registry.authenticate("door-1", "00" * 32)
except Exception as exc:
    print(f"wrong secret is rejected: {exc}")

# --- motion triggers with debounce -------------------------------------------
# Three triggers land within one second of each other; the 1000 ms debounce
# keeps only the first, then the 5s-later trigger is far enough to pass.
frame_ids = [frame.frame_id for frame in dataset.frames_for_device("door-1")]
script = MotionScript(
    device_id="door-1",
    entries=((0, frame_ids[0]), (300, frame_ids[1]), (800, frame_ids[2]),
             (5000, frame_ids[3])),
    debounce_ms=1000,
)
events = list(run_motion_script(script, dataset))
print(f"\n{len(script.entries)} triggers -> {len(events)} motion events after debounce")
for event, frame in events:
    print(f"  {event.event_id} at t={event.at} ms carrying {frame.frame_id}")
