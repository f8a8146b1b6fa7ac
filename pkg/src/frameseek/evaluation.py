"""Challenge scoring: per-task R-Scores, mean of top-k R-Scores, submissions.

Three task types share one submission format. KIS scores 1 when any predicted
frame lands in the ground-truth range of the right video; QA additionally
requires the answer to match; TRAKE scores the fraction of ground-truth
segments hit by the rank's predicted frames, consumed in order (frame j must
land in segment j, widened by the tolerance).
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SubmissionError

TASK_KIS = "KIS"
TASK_QA = "QA"
TASK_TRAKE = "TRAKE"
TASKS = (TASK_KIS, TASK_QA, TASK_TRAKE)

DEFAULT_KS = (1, 5, 20, 50, 100)


@dataclass(frozen=True)
class KSet:
    ks: tuple[int, ...] = DEFAULT_KS

    def __post_init__(self) -> None:
        if not self.ks:
            raise ValueError("KSet must contain at least one k")
        prev = 0
        for k in self.ks:
            if k < 1:
                raise ValueError(f"k must be >= 1, got {k}")
            if k <= prev:
                raise ValueError("ks must be strictly increasing")
            prev = k


@dataclass(frozen=True)
class GroundTruthItem:
    query_id: str
    task: str
    video_name: str
    segments: tuple[tuple[int, int], ...]
    answer: str | None = None
    tolerance: int = 0

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if not self.segments:
            raise ValueError("at least one frame range is required")
        prev_hi = None
        for lo, hi in self.segments:
            if lo > hi:
                raise ValueError(f"range ({lo}, {hi}) has lo > hi")
            if prev_hi is not None and lo <= prev_hi:
                raise ValueError("segments must be ordered and non-overlapping")
            prev_hi = hi
        if self.task == TASK_QA and self.answer is None:
            raise ValueError("QA items carry an answer")
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")

    @property
    def frame_range(self) -> tuple[int, int]:
        return self.segments[0]


@dataclass(frozen=True)
class Prediction:
    rank: int
    video_name: str
    frames: tuple[int, ...]
    answer: str | None = None

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if not self.frames:
            raise ValueError("frames must be non-empty")


def normalize_answer(text: str) -> str:
    """Trim, compose canonically, and case-fold; competition text hygiene."""
    return unicodedata.normalize("NFC", text).strip().casefold()


def split_video_name(video_name: str) -> tuple[str, str]:
    """``group_videoid`` joined by the first underscore."""
    group, _, video = video_name.partition("_")
    if not group or not video:
        raise ValueError(f"video name {video_name!r} is not of the form group_video")
    return group, video


def r_score(prediction: Prediction, gt: GroundTruthItem, strict_answers: bool = False) -> float:
    """Correctness of one prediction in [0, 1], by task type."""
    if prediction.video_name != gt.video_name:
        return 0.0
    if gt.task in (TASK_KIS, TASK_QA):
        lo, hi = gt.frame_range
        frame_ok = any(lo <= f <= hi for f in prediction.frames)
        if gt.task == TASK_KIS:
            return 1.0 if frame_ok else 0.0
        if not frame_ok or prediction.answer is None:
            return 0.0
        if strict_answers:
            return 1.0 if prediction.answer == gt.answer else 0.0
        return 1.0 if normalize_answer(prediction.answer) == normalize_answer(gt.answer) else 0.0
    # TRAKE: predicted frame j must land inside segment j widened by tolerance.
    hits = 0
    for (lo, hi), frame in zip(gt.segments, prediction.frames):
        if lo - gt.tolerance <= frame <= hi + gt.tolerance:
            hits += 1
    return hits / len(gt.segments)


def final_score(predictions: list[Prediction], gt: GroundTruthItem, ks: KSet = KSet(), strict_answers: bool = False) -> float:
    """Mean over k of the best R-Score within the top-k ranked predictions.

    Ranks without a prediction contribute an R-Score of 0.
    """
    by_rank: dict[int, float] = {}
    for p in predictions:
        if p.rank in by_rank:
            raise ValueError(f"duplicate rank {p.rank} in submission")
        by_rank[p.rank] = r_score(p, gt, strict_answers)
    total = 0.0
    for k in ks.ks:
        total += max((by_rank.get(rank, 0.0) for rank in range(1, k + 1)), default=0.0)
    return total / len(ks.ks)


def parse_submission(path: str | Path) -> list[tuple[str, list[Prediction]]]:
    """Comma-separated lines: ``query_id, video_name, frame[;frame...][, answer]``.

    Rank is line order within each query. Duplicate (query, video, frames)
    lines are rejected.
    """
    grouped: dict[str, list[Prediction]] = {}
    seen: set[tuple[str, str, tuple[int, ...]]] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",", 3)]
            if len(parts) < 3:
                raise SubmissionError(f"expected 'query_id, video_name, frames[, answer]', got {line!r}", line=lineno)
            query_id, video_name, frames_text = parts[0], parts[1], parts[2]
            answer = parts[3] if len(parts) > 3 else None
            if not query_id or not video_name:
                raise SubmissionError("query_id and video_name must be non-empty", line=lineno)
            if not frames_text:
                raise SubmissionError("no frames given", line=lineno)
            frames = []
            for piece in frames_text.split(";"):
                piece = piece.strip()
                if not piece.isdigit():
                    raise SubmissionError(f"bad frame index {piece!r}", line=lineno)
                frames.append(int(piece))
            dedup_key = (query_id, video_name, tuple(frames))
            if dedup_key in seen:
                raise SubmissionError(f"duplicate prediction {dedup_key}", line=lineno)
            seen.add(dedup_key)
            predictions = grouped.setdefault(query_id, [])
            predictions.append(Prediction(rank=len(predictions) + 1, video_name=video_name, frames=tuple(frames), answer=answer))
    return list(grouped.items())


def parse_ground_truth(path: str | Path) -> dict[str, GroundTruthItem]:
    """Line-delimited JSON records, one per query."""
    items: dict[str, GroundTruthItem] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                if "segments" in record:
                    segments = tuple((int(lo), int(hi)) for lo, hi in record["segments"])
                else:
                    lo, hi = record["frame_range"]
                    segments = ((int(lo), int(hi)),)
                item = GroundTruthItem(
                    query_id=str(record["query_id"]),
                    task=str(record["task"]),
                    video_name=str(record["video_name"]),
                    segments=segments,
                    answer=record.get("answer"),
                    tolerance=int(record.get("tolerance", 0)),
                )
            except SubmissionError:
                raise
            except Exception as exc:
                raise SubmissionError(f"bad ground-truth record: {exc}", line=lineno) from exc
            if item.query_id in items:
                raise SubmissionError(f"duplicate query_id {item.query_id!r}", line=lineno)
            items[item.query_id] = item
    return items


@dataclass
class EvalReport:
    per_query: list[tuple[str, float]]
    mean_score: float
    ks: tuple[int, ...]
    missing_queries: list[str] = field(default_factory=list)


def evaluate(
    submission: list[tuple[str, list[Prediction]]],
    ground_truth: dict[str, GroundTruthItem],
    ks: KSet = KSet(),
    strict_answers: bool = False,
) -> EvalReport:
    """Score every ground-truth query; unsubmitted queries score 0."""
    submitted = dict(submission)
    per_query = []
    missing = []
    for query_id in sorted(ground_truth):
        gt = ground_truth[query_id]
        predictions = submitted.get(query_id)
        if predictions is None:
            missing.append(query_id)
            per_query.append((query_id, 0.0))
        else:
            per_query.append((query_id, final_score(predictions, gt, ks, strict_answers)))
    mean = sum(score for _, score in per_query) / len(per_query) if per_query else 0.0
    return EvalReport(per_query=per_query, mean_score=mean, ks=ks.ks, missing_queries=missing)
