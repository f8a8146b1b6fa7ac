"""Frame identity, shot records, keyframe selection, and frame-to-time mapping.

The catalog is the single source of truth for which keyframes exist; every
index stores and returns :class:`FrameKey` values minted here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterator

from .errors import FrameKeyError, IngestError

Video = tuple[str, str]

DEFAULT_PERCENTILES = (0.15, 0.5, 0.85)


@dataclass(frozen=True)
class FrameKey:
    """Hierarchical identity of one keyframe: group/video/frame.

    Group and video ids are opaque strings; no numeric meaning is assumed.
    The canonical text form ``group_id/video_id/frame_id`` doubles as the
    system-wide tie-break sort key.
    """

    group_id: str
    video_id: str
    frame_id: int

    def __post_init__(self) -> None:
        for name in ("group_id", "video_id"):
            value = getattr(self, name)
            if not value:
                raise FrameKeyError(f"{name} must be non-empty")
            if "/" in value:
                raise FrameKeyError(f"{name} must not contain '/': {value!r}")
        if not isinstance(self.frame_id, int) or isinstance(self.frame_id, bool):
            raise FrameKeyError(f"frame_id must be an integer, got {self.frame_id!r}")
        if self.frame_id < 0:
            raise FrameKeyError(f"frame_id must be >= 0, got {self.frame_id}")

    @property
    def video(self) -> Video:
        return (self.group_id, self.video_id)

    @property
    def text(self) -> str:
        """Canonical form, frame id rendered as an unpadded decimal."""
        return f"{self.group_id}/{self.video_id}/{self.frame_id}"

    def __str__(self) -> str:
        return self.text


def parse_frame_key(text: str) -> FrameKey:
    """Parse canonical ``group/video/frame`` text back into a :class:`FrameKey`."""
    parts = text.split("/")
    if len(parts) != 3:
        raise FrameKeyError(f"expected 3 '/'-separated segments, got {len(parts)}: {text!r}")
    group_id, video_id, frame_text = parts
    if not group_id:
        raise FrameKeyError(f"empty group_id segment in {text!r}")
    if not video_id:
        raise FrameKeyError(f"empty video_id segment in {text!r}")
    if not frame_text or not frame_text.isdigit():
        raise FrameKeyError(f"frame_id segment is not a non-negative integer: {frame_text!r}")
    return FrameKey(group_id, video_id, int(frame_text))


def render_frame_key(key: FrameKey) -> str:
    return key.text


@dataclass(frozen=True)
class Shot:
    """One contiguous segment of a video, frame range inclusive on both ends."""

    group_id: str
    video_id: str
    start_frame: int
    end_frame: int

    def __post_init__(self) -> None:
        if self.start_frame < 0:
            raise ValueError(f"start_frame must be >= 0, got {self.start_frame}")
        if self.start_frame > self.end_frame:
            raise ValueError(f"start_frame {self.start_frame} > end_frame {self.end_frame}")

    @property
    def video(self) -> Video:
        return (self.group_id, self.video_id)

    @property
    def frame_count(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class KeyframePolicy:
    """Which positions inside a shot become keyframes.

    Percentiles are fractions of the shot span, strictly increasing in [0, 1].
    """

    percentiles: tuple[float, ...] = DEFAULT_PERCENTILES

    def __post_init__(self) -> None:
        if not self.percentiles:
            raise ValueError("policy needs at least one percentile")
        prev = None
        for p in self.percentiles:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"percentile {p} outside [0, 1]")
            if prev is not None and p <= prev:
                raise ValueError("percentiles must be strictly increasing")
            prev = p


@dataclass(frozen=True)
class VideoMeta:
    group_id: str
    video_id: str
    fps: float
    frame_count: int

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise ValueError(f"fps must be > 0, got {self.fps}")
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")

    @property
    def video(self) -> Video:
        return (self.group_id, self.video_id)


def _round_half_down(x: Fraction) -> int:
    # Exact ties (x.5) round toward the lower frame index.
    return math.ceil(x - Fraction(1, 2))


def select_keyframes(shot: Shot, policy: KeyframePolicy = KeyframePolicy()) -> list[int]:
    """Pick representative frame indices for a shot.

    Shots with no more frames than the policy has percentiles contribute every
    frame. Longer shots contribute ``start + p * (end - start)`` per percentile,
    rounded half-down. Positions are evaluated in exact rational arithmetic so
    the float percentiles cannot shift a result across a rounding boundary.
    """
    if shot.frame_count <= len(policy.percentiles):
        return list(range(shot.start_frame, shot.end_frame + 1))
    span = shot.end_frame - shot.start_frame
    picked = set()
    for p in policy.percentiles:
        position = Fraction(shot.start_frame) + Fraction(p) * span
        picked.add(_round_half_down(position))
    return sorted(picked)


def index_to_time(key: FrameKey, meta: VideoMeta) -> float:
    """Map a keyframe index to its timestamp in seconds."""
    if key.video != meta.video:
        raise KeyError(f"metadata is for video {meta.video}, key is {key.video}")
    if key.frame_id >= meta.frame_count:
        raise ValueError(
            f"frame {key.frame_id} out of range for {meta.group_id}/{meta.video_id} "
            f"(frame_count {meta.frame_count})"
        )
    return key.frame_id / meta.fps


VideoFilter = Callable[[str, str], bool]


@dataclass
class BuildCounts:
    shots: int = 0
    keyframes: int = 0
    videos: int = 0
    skipped: int = 0


class Catalog:
    """In-memory registry of shots, video metadata, and selected keyframes.

    Mutable while ingesting; treat as read-only once handed to the indices.
    """

    def __init__(self, policy: KeyframePolicy = KeyframePolicy()):
        self.policy = policy
        self._shots: dict[Video, list[Shot]] = {}
        self._meta: dict[Video, VideoMeta] = {}
        self._keyframes: dict[Video, list[int]] = {}

    def add_meta(self, meta: VideoMeta) -> None:
        self._meta[meta.video] = meta

    def add_shot(self, shot: Shot) -> list[int]:
        """Register a shot and return the keyframes selected for it."""
        shots = self._shots.setdefault(shot.video, [])
        for other in shots:
            if shot.start_frame <= other.end_frame and other.start_frame <= shot.end_frame:
                raise ValueError(
                    f"shot [{shot.start_frame}, {shot.end_frame}] overlaps "
                    f"[{other.start_frame}, {other.end_frame}] in {shot.group_id}/{shot.video_id}"
                )
        shots.append(shot)
        shots.sort(key=lambda s: s.start_frame)
        frames = select_keyframes(shot, self.policy)
        existing = self._keyframes.setdefault(shot.video, [])
        merged = sorted(set(existing) | set(frames))
        self._keyframes[shot.video] = merged
        return frames

    def videos(self) -> list[Video]:
        return sorted(set(self._shots) | set(self._meta))

    def shots_for(self, video: Video) -> list[Shot]:
        return list(self._shots.get(video, []))

    def meta_for(self, video: Video) -> VideoMeta | None:
        return self._meta.get(video)

    def keyframes_for(self, video: Video) -> list[int]:
        return list(self._keyframes.get(video, []))

    def keyframes_in_span(self, video: Video, start_frame: int, end_frame: int) -> list[int]:
        return [f for f in self._keyframes.get(video, []) if start_frame <= f <= end_frame]

    def iter_keys(self) -> Iterator[FrameKey]:
        for video in sorted(self._keyframes):
            group_id, video_id = video
            for frame_id in self._keyframes[video]:
                yield FrameKey(group_id, video_id, frame_id)

    def time_of(self, key: FrameKey, fps_fallback: float | None = None) -> float:
        meta = self._meta.get(key.video)
        if meta is None:
            if fps_fallback is None:
                raise KeyError(f"no metadata for video {key.group_id}/{key.video_id}")
            return key.frame_id / fps_fallback
        return index_to_time(key, meta)

    @property
    def counts(self) -> BuildCounts:
        counts = BuildCounts(videos=len(self.videos()))
        for shots in self._shots.values():
            counts.shots += len(shots)
        for frames in self._keyframes.values():
            counts.keyframes += len(frames)
        return counts


def _read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise IngestError(f"invalid JSON: {exc.msg}", path=str(path), line=lineno) from exc
            if not isinstance(record, dict):
                raise IngestError("record must be a JSON object", path=str(path), line=lineno)
            yield lineno, record


def load_shots(path: str | Path, catalog: Catalog, video_filter: VideoFilter | None = None) -> BuildCounts:
    """Ingest one shot per line: {group_id, video_id, start_frame, end_frame}."""
    counts = BuildCounts()
    for lineno, record in _read_jsonl(path):
        try:
            shot = Shot(
                group_id=str(record["group_id"]),
                video_id=str(record["video_id"]),
                start_frame=int(record["start_frame"]),
                end_frame=int(record["end_frame"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"bad shot record: {exc}", path=str(path), line=lineno) from exc
        if video_filter is not None and not video_filter(shot.group_id, shot.video_id):
            counts.skipped += 1
            continue
        counts.keyframes += len(catalog.add_shot(shot))
        counts.shots += 1
    return counts


def load_video_meta(path: str | Path, catalog: Catalog, video_filter: VideoFilter | None = None) -> BuildCounts:
    """Ingest one video per line: {group_id, video_id, fps, frame_count}."""
    counts = BuildCounts()
    for lineno, record in _read_jsonl(path):
        try:
            meta = VideoMeta(
                group_id=str(record["group_id"]),
                video_id=str(record["video_id"]),
                fps=float(record["fps"]),
                frame_count=int(record["frame_count"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"bad video record: {exc}", path=str(path), line=lineno) from exc
        if video_filter is not None and not video_filter(meta.group_id, meta.video_id):
            counts.skipped += 1
            continue
        catalog.add_meta(meta)
        counts.videos += 1
    return counts
