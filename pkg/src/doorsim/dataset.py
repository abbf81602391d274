"""Dataset manifests: the single source of frames for every simulation.

A manifest is newline-delimited JSON, one frame per line:

    {"frame_id": "...", "scenario": "...", "truth_labels": [...],
     "truth_identity": "...", "device_id": "..."}

The generator fabricates labeled manifests with a configurable
positive/negative ratio per scenario; no imagery is ever produced.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .draws import choice_draw, int_draw, unit_draw
from .errors import DatasetError, ValidationError
from .model import DEFAULT_VOCABULARY, FaceCategory, FrameSample, Label, ScenarioKind

__all__ = [
    "Dataset",
    "GeneratorConfig",
    "generate_dataset",
    "load_manifest",
    "manifest_row",
    "save_manifest",
    "DEFAULT_POSITIVE_FRACTION",
    "DEFAULT_KNOWN_FACES",
]

# Positive/negative mix per scenario. Four scenarios use a balanced split;
# multi-object uses a 17/83 split so that per-object tallies line up with
# its published count row.
DEFAULT_POSITIVE_FRACTION: Mapping[ScenarioKind, float] = {
    ScenarioKind.FACE_RECOGNITION: 0.50,
    ScenarioKind.UNSAFE_CONTENT: 0.50,
    ScenarioKind.ANIMAL_DETECTION: 0.50,
    ScenarioKind.NOTEWORTHY_VEHICLE: 0.50,
    ScenarioKind.MULTI_OBJECT: 0.17,
}

# Identities enrolled by default before an experiment runs; everything else
# resolves to the unknown category.
DEFAULT_KNOWN_FACES: Mapping[str, FaceCategory] = {
    "alice": FaceCategory.FAMILY,
    "bob": FaceCategory.FRIEND,
    "carol": FaceCategory.VISITOR,
}

_STRANGERS = ("mallory", "trent", "oscar")


class Dataset:
    """An in-memory manifest with frame lookup by id and by device."""

    def __init__(self, frames: Sequence[FrameSample]):
        self._frames: dict[str, FrameSample] = {}
        for frame in frames:
            if frame.frame_id in self._frames:
                raise DatasetError(f"duplicate frame_id in manifest: {frame.frame_id}")
            self._frames[frame.frame_id] = frame

    def __len__(self) -> int:
        return len(self._frames)

    def __iter__(self):
        return iter(self._frames.values())

    def get(self, frame_id: str) -> FrameSample:
        try:
            return self._frames[frame_id]
        except KeyError:
            raise DatasetError(f"unknown frame_id: {frame_id}") from None

    def frames_for_device(self, device_id: str) -> list[FrameSample]:
        return [f for f in self if f.device_id == device_id]

    @property
    def device_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for frame in self:
            seen.setdefault(frame.device_id, None)
        return list(seen)

    def fingerprint(self) -> str:
        """Content hash of the manifest, used to pair reports with data."""
        digest = hashlib.sha256()
        for frame in self:
            digest.update(json.dumps(manifest_row(frame), sort_keys=True).encode())
            digest.update(b"\n")
        return digest.hexdigest()


def load_manifest(path: str | Path) -> Dataset:
    """Read a newline-delimited JSON manifest."""
    frames = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                frames.append(FrameSample.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad manifest line: {exc}") from exc
    return Dataset(frames)


def manifest_row(frame: FrameSample) -> dict:
    """The manifest projection of a frame: fixture data only, no timestamps."""
    return {
        "frame_id": frame.frame_id,
        "scenario": frame.scenario.value,
        "truth_labels": sorted(label.name for label in frame.truth),
        "truth_identity": frame.truth_identity,
        "device_id": frame.device_id,
    }


def save_manifest(frames: Iterable[FrameSample], path: str | Path) -> None:
    """Write frames as a newline-delimited JSON manifest."""
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(json.dumps(manifest_row(frame), sort_keys=True))
            fh.write("\n")


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters for synthetic manifest generation.

    ``negatives`` may be left None to derive the count from the scenario's
    default positive fraction.
    """

    scenarios: tuple[ScenarioKind, ...]
    positives: int
    negatives: int | None = None
    devices: tuple[str, ...] = ("door-1",)
    seed: int = 0
    known_faces: Mapping[str, FaceCategory] = field(
        default_factory=lambda: dict(DEFAULT_KNOWN_FACES)
    )
    known_face_fraction: float = 0.5
    max_labels_per_frame: int = 2

    def __post_init__(self) -> None:
        if self.positives < 0:
            raise ValidationError("positives must be >= 0")
        if self.negatives is not None and self.negatives < 0:
            raise ValidationError("negatives must be >= 0")
        if not self.devices:
            raise ValidationError("at least one device id required")
        if not self.scenarios:
            raise ValidationError("at least one scenario required")

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "GeneratorConfig":
        scenarios = tuple(ScenarioKind(s) for s in data.get("scenarios", []))
        known = {
            token: FaceCategory(cat)
            for token, cat in dict(data.get("known_faces", DEFAULT_KNOWN_FACES)).items()
        }
        return cls(
            scenarios=scenarios or tuple(ScenarioKind),
            positives=int(data.get("positives", 100)),
            negatives=(None if data.get("negatives") is None else int(data["negatives"])),
            devices=tuple(data.get("devices", ("door-1",))),
            seed=int(data.get("seed", 0)),
            known_faces=known,
            known_face_fraction=float(data.get("known_face_fraction", 0.5)),
            max_labels_per_frame=int(data.get("max_labels_per_frame", 2)),
        )


def _negative_count(config: GeneratorConfig, scenario: ScenarioKind) -> int:
    if config.negatives is not None:
        return config.negatives
    fraction = DEFAULT_POSITIVE_FRACTION[scenario]
    if config.positives == 0:
        return 0
    return round(config.positives * (1.0 - fraction) / fraction)


def _truth_for_positive(
    config: GeneratorConfig, scenario: ScenarioKind, frame_id: str
) -> tuple[frozenset[Label], str | None]:
    vocab = DEFAULT_VOCABULARY[scenario]
    if scenario is ScenarioKind.FACE_RECOGNITION:
        known = unit_draw("gen-known", config.seed, frame_id) < config.known_face_fraction
        if known and config.known_faces:
            token = choice_draw(sorted(config.known_faces), "gen-id", config.seed, frame_id)
        else:
            token = choice_draw(_STRANGERS, "gen-id", config.seed, frame_id)
        return frozenset({Label(vocab[0], scenario)}), token
    if scenario is ScenarioKind.MULTI_OBJECT and config.max_labels_per_frame > 1:
        count = int_draw(1, min(config.max_labels_per_frame, len(vocab)),
                         "gen-count", config.seed, frame_id)
        names: list[str] = []
        for slot in range(count):
            name = choice_draw(vocab, "gen-label", config.seed, frame_id, slot)
            if name not in names:
                names.append(name)
        return frozenset(Label(n, scenario) for n in names), None
    name = choice_draw(vocab, "gen-label", config.seed, frame_id)
    return frozenset({Label(name, scenario)}), None


def generate_dataset(config: GeneratorConfig) -> list[FrameSample]:
    """Fabricate a labeled dataset, deterministic for a given config."""
    frames: list[FrameSample] = []
    for scenario in config.scenarios:
        total = config.positives + _negative_count(config, scenario)
        for index in range(total):
            frame_id = f"{scenario.value}-{index:05d}"
            device_id = config.devices[index % len(config.devices)]
            if index < config.positives:
                truth, identity = _truth_for_positive(config, scenario, frame_id)
            else:
                truth, identity = frozenset(), None
            frames.append(
                FrameSample(
                    frame_id=frame_id,
                    device_id=device_id,
                    captured_at=0,
                    truth=truth,
                    scenario=scenario,
                    truth_identity=identity,
                )
            )
    return frames
