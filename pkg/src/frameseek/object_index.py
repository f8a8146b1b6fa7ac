"""Per-keyframe object detections behind a lazily parsed JSON store.

The store file maps canonical frame-key text to detection lists. Nothing is
read until the first query; the parsed structure is then shared, immutable,
by all subsequent queries.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from .catalog import FrameKey, parse_frame_key
from .errors import IngestError

MODE_AND = "AND"
MODE_OR = "OR"


@dataclass(frozen=True)
class Detection:
    label: str
    score: float
    bbox: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("label must be non-empty")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        x, y, w, h = self.bbox
        if not all(0.0 <= v <= 1.0 for v in self.bbox):
            raise ValueError(f"bbox {self.bbox} outside [0, 1]")
        if w <= 0 or h <= 0:
            raise ValueError(f"bbox width/height must be > 0, got {self.bbox}")


@dataclass(frozen=True)
class ObjectQuery:
    """Label filter with AND/OR logic and an optional confidence floor."""

    labels: tuple[str, ...]
    mode: str = MODE_OR
    min_score: float = 0.0

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("labels must be non-empty")
        deduped = []
        seen = set()
        for label in self.labels:
            if label not in seen:
                seen.add(label)
                deduped.append(label)
        object.__setattr__(self, "labels", tuple(deduped))
        if self.mode not in (MODE_AND, MODE_OR):
            raise ValueError(f"mode must be {MODE_AND} or {MODE_OR}, got {self.mode!r}")
        if not 0.0 <= self.min_score <= 1.0:
            raise ValueError(f"min_score {self.min_score} outside [0, 1]")


class ObjectStore:
    """Lazy-loading detection store; one parse guarded by a lock."""

    def __init__(self, path: str | Path, video_filter=None):
        self.path = Path(path)
        self.video_filter = video_filter
        self._data: dict[FrameKey, list[Detection]] | None = None
        self._lock = threading.Lock()
        self.load_count = 0

    @property
    def loaded(self) -> bool:
        return self._data is not None

    def _load(self) -> dict[FrameKey, list[Detection]]:
        with self._lock:
            if self._data is None:
                try:
                    raw = self.path.read_text(encoding="utf-8")
                except OSError as exc:
                    raise IngestError(f"cannot read detections: {exc}", path=str(self.path)) from exc
                try:
                    payload = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise IngestError(f"invalid JSON: {exc.msg}", path=str(self.path), offset=exc.pos) from exc
                if not isinstance(payload, dict):
                    raise IngestError("top level must be an object keyed by frame-key text", path=str(self.path))
                data: dict[FrameKey, list[Detection]] = {}
                for key_text, records in payload.items():
                    key = parse_frame_key(key_text)
                    if self.video_filter is not None and not self.video_filter(key.group_id, key.video_id):
                        continue
                    detections = []
                    for record in records:
                        try:
                            detections.append(
                                Detection(
                                    label=str(record["label"]),
                                    score=float(record["score"]),
                                    bbox=tuple(float(v) for v in record["bbox"]),
                                )
                            )
                        except (KeyError, TypeError, ValueError) as exc:
                            raise IngestError(f"bad detection under {key_text!r}: {exc}", path=str(self.path)) from exc
                    data[key] = detections
                self._data = data
                self.load_count += 1
        return self._data

    def filter_frames(self, query: ObjectQuery, k: int) -> list[tuple[FrameKey, int]]:
        """Frames passing the label filter, ranked by matched detection count.

        The count is detection instances (two people count twice), restricted
        to detections at or above ``min_score``. Ties break on canonical key.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        data = self._load()
        wanted = set(query.labels)
        results = []
        for key, detections in data.items():
            passing = [d for d in detections if d.label in wanted and d.score >= query.min_score]
            present = {d.label for d in passing}
            if query.mode == MODE_AND:
                if not wanted.issubset(present):
                    continue
            else:
                if not present:
                    continue
            results.append((key, len(passing)))
        results.sort(key=lambda item: (-item[1], item[0].text))
        return results[:k]

    def labels_for(self, key: FrameKey) -> list[str]:
        data = self._load()
        return sorted({d.label for d in data.get(key, [])})

    def detections_for(self, key: FrameKey) -> list[Detection]:
        data = self._load()
        return list(data.get(key, []))

    def frame_count(self) -> int:
        return len(self._load())

    def detection_count(self) -> int:
        return sum(len(v) for v in self._load().values())
