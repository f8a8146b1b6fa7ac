"""Plan execution, score fusion, temporal retrieval, and answer synthesis.

Per-modality searches run concurrently and fail independently; fusion and
temporal aggregation are pure reductions, so repeated execution of one plan
against frozen indices yields bit-identical rankings.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .catalog import Catalog, FrameKey
from .clients import EmbeddingClient, LlmClient
from .errors import PipelineError, SynthesisError, TransportError
from .object_index import ObjectStore
from .planner import MODALITIES, ModalityWeights, SearchPlan
from .text_index import CHANNEL_ASR, CHANNEL_OCR, TextHit, TextIndex
from .vector_index import VectorIndex

ANSWER_TASK = "TASK: answer"

DEFAULT_TEMPORAL_DEPTH = 200


@dataclass(frozen=True)
class ScoredFrame:
    """A frame with its per-modality normalized scores and their weighted fusion."""

    key: FrameKey
    per_modality: dict[str, float]
    fused: float


@dataclass(frozen=True)
class ScoredVideo:
    group_id: str
    video_id: str
    score: float

    @property
    def video(self) -> tuple[str, str]:
        return (self.group_id, self.video_id)


@dataclass(frozen=True)
class TemporalStepResult:
    """Per-step retrieval: each video's best keyframe similarity for one query."""

    step_index: int
    per_video: dict[tuple[str, str], float]


@dataclass
class EvidencePackage:
    group_id: str
    video_id: str
    frames: list[ScoredFrame]
    asr_snippets: list[TextHit] = field(default_factory=list)
    ocr_texts: list[TextHit] = field(default_factory=list)
    objects: list[tuple[FrameKey, list[str]]] = field(default_factory=list)

    @property
    def video(self) -> tuple[str, str]:
        return (self.group_id, self.video_id)

    @property
    def best_fused(self) -> float:
        return max((f.fused for f in self.frames), default=0.0)


@dataclass
class ExecutionResult:
    results: dict[str, list]
    warnings: list[str] = field(default_factory=list)


def execute_plan(
    plan: SearchPlan,
    *,
    embedder: EmbeddingClient | None = None,
    vectors: VectorIndex | None = None,
    texts: TextIndex | None = None,
    objects: ObjectStore | None = None,
    scope_filter=None,
    max_workers: int = 4,
) -> ExecutionResult:
    """Run every positively weighted modality of the plan concurrently.

    A modality that raises contributes an empty list plus a warning; the run
    only fails if every attempted modality failed.
    """
    k = plan.top_k_per_modality

    def run_semantic() -> list:
        vector = embedder.embed_text(plan.semantic_query)
        return vectors.search(vector, k=k, scope_filter=scope_filter)

    def run_text(channel: str, keywords) -> list:
        query = " ".join(keywords) if keywords else plan.original_query
        hits = texts.search_text(query, channel=channel, k=k)
        if scope_filter is not None:
            hits = [h for h in hits if scope_filter(FrameKey(h.doc.group_id, h.doc.video_id, max(0, h.doc.start_frame)))]
        return hits

    def run_object() -> list:
        results = objects.filter_frames(plan.object_query, k=k)
        if scope_filter is not None:
            results = [(key, count) for key, count in results if scope_filter(key)]
        return results

    jobs: dict[str, callable] = {}
    if plan.weights.semantic > 0 and embedder is not None and vectors is not None:
        jobs["semantic"] = run_semantic
    if plan.weights.asr > 0 and texts is not None:
        jobs["asr"] = lambda: run_text(CHANNEL_ASR, plan.asr_keywords)
    if plan.weights.ocr > 0 and texts is not None:
        jobs["ocr"] = lambda: run_text(CHANNEL_OCR, plan.ocr_keywords)
    if plan.weights.object > 0 and objects is not None and plan.object_query is not None:
        jobs["object"] = run_object

    outcome = ExecutionResult(results={})
    if not jobs:
        return outcome

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {name: pool.submit(fn) for name, fn in jobs.items()}
    failures = 0
    for name in MODALITIES:
        if name not in futures:
            continue
        try:
            outcome.results[name] = futures[name].result()
        except Exception as exc:
            failures += 1
            outcome.results[name] = []
            outcome.warnings.append(f"{name} search failed: {exc}")
    if failures == len(futures):
        raise PipelineError(f"every modality failed: {'; '.join(outcome.warnings)}")
    return outcome


def _min_max(values: list[float]) -> list[float]:
    if not values:
        return []
    lo, hi = min(values), max(values)
    if hi == lo:
        return [1.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def _frame_scores(modality: str, results: list, catalog: Catalog | None) -> dict[FrameKey, float]:
    """Normalize one modality's raw scores and resolve them to frame level."""
    out: dict[FrameKey, float] = {}

    def record(key: FrameKey, score: float) -> None:
        if key not in out or score > out[key]:
            out[key] = score

    if modality == "semantic":
        normalized = _min_max([hit.score for hit in results])
        for hit, score in zip(results, normalized):
            record(hit.key, score)
    elif modality == "object":
        normalized = _min_max([float(count) for _, count in results])
        for (key, _), score in zip(results, normalized):
            record(key, score)
    elif modality == "ocr":
        normalized = _min_max([hit.score for hit in results])
        for hit, score in zip(results, normalized):
            record(FrameKey(hit.doc.group_id, hit.doc.video_id, hit.doc.start_frame), score)
    elif modality == "asr":
        # Segment hits spread their score over every cataloged keyframe the
        # segment covers, keeping fusion strictly frame-level.
        if catalog is None:
            raise ValueError("fusing ASR hits requires the catalog for segment-to-keyframe projection")
        normalized = _min_max([hit.score for hit in results])
        for hit, score in zip(results, normalized):
            doc = hit.doc
            for frame_id in catalog.keyframes_in_span(doc.video, doc.start_frame, doc.end_frame):
                record(FrameKey(doc.group_id, doc.video_id, frame_id), score)
    else:
        raise ValueError(f"unknown modality {modality!r}")
    return out


def fuse(
    results_by_modality: dict[str, list],
    weights: ModalityWeights,
    catalog: Catalog | None = None,
) -> list[ScoredFrame]:
    """Min-max normalize each modality, then weighted-average per frame.

    Only modalities in which a frame was actually retrieved enter that frame's
    average (numerator and denominator alike). The reduction runs in exact
    rational arithmetic, so it is independent of modality iteration order and
    decimal-friendly inputs fuse to decimal-exact outputs.
    """
    per_modality: dict[str, dict[FrameKey, float]] = {}
    for modality in MODALITIES:
        results = results_by_modality.get(modality)
        if results:
            per_modality[modality] = _frame_scores(modality, results, catalog)

    all_keys: set[FrameKey] = set()
    for scores in per_modality.values():
        all_keys.update(scores)

    fused_frames = []
    for key in all_keys:
        numerator = Fraction(0)
        denominator = Fraction(0)
        present: dict[str, float] = {}
        for modality, scores in per_modality.items():
            if key not in scores:
                continue
            weight = weights.get(modality)
            present[modality] = scores[key]
            if weight > 0:
                numerator += Fraction(weight) * Fraction(scores[key])
                denominator += Fraction(weight)
        if denominator == 0:
            continue
        fused_frames.append(ScoredFrame(key=key, per_modality=present, fused=float(numerator / denominator)))
    fused_frames.sort(key=lambda f: (-f.fused, f.key.text))
    return fused_frames


def temporal_steps(
    queries: list[str],
    *,
    embedder: EmbeddingClient,
    vectors: VectorIndex,
    k_per_step: int = DEFAULT_TEMPORAL_DEPTH,
) -> list[TemporalStepResult]:
    """Per-step video sets: full-depth vector search aggregated to per-video max,
    truncated to the top ``k_per_step`` videos."""
    if not queries:
        raise ValueError("temporal search needs at least one query")
    if k_per_step < 1:
        raise ValueError(f"k_per_step must be >= 1, got {k_per_step}")
    steps = []
    depth = max(len(vectors), 1)
    for i, query in enumerate(queries):
        vector = embedder.embed_text(query)
        hits = vectors.search(vector, k=depth)
        best: dict[tuple[str, str], float] = {}
        for hit in hits:
            video = hit.key.video
            if video not in best or hit.score > best[video]:
                best[video] = hit.score
        ranked = sorted(best.items(), key=lambda item: (-item[1], item[0]))[:k_per_step]
        steps.append(TemporalStepResult(step_index=i, per_video=dict(ranked)))
    return steps


def temporal_search(
    queries: list[str],
    *,
    embedder: EmbeddingClient,
    vectors: VectorIndex,
    k_per_step: int = DEFAULT_TEMPORAL_DEPTH,
) -> list[ScoredVideo]:
    """Videos containing the whole ordered event sequence.

    Candidates are the intersection of every step's video set; each scores the
    minimum of its step scores, rewarding consistent relevance across steps.
    """
    steps = temporal_steps(queries, embedder=embedder, vectors=vectors, k_per_step=k_per_step)
    candidates = set(steps[0].per_video)
    for step in steps[1:]:
        candidates &= set(step.per_video)
    scored = [
        ScoredVideo(group_id=video[0], video_id=video[1], score=min(step.per_video[video] for step in steps))
        for video in candidates
    ]
    scored.sort(key=lambda v: (-v.score, v.video))
    return scored


def group_by_video(
    frames: list[ScoredFrame],
    *,
    texts: TextIndex | None = None,
    objects: ObjectStore | None = None,
) -> list[EvidencePackage]:
    """Partition fused frames by video and attach contextual evidence.

    Packages order by their best fused score. Evidence rows pulled here carry
    no query score (they are context, not hits).
    """
    by_video: dict[tuple[str, str], list[ScoredFrame]] = {}
    for frame in frames:
        by_video.setdefault(frame.key.video, []).append(frame)

    packages = []
    for video, members in by_video.items():
        members.sort(key=lambda f: (-f.fused, f.key.text))
        frame_ids = {f.key.frame_id for f in members}
        package = EvidencePackage(group_id=video[0], video_id=video[1], frames=members)
        if texts is not None and texts.frozen:
            for doc in texts.docs_for_video(*video, channel=CHANNEL_ASR):
                if any(doc.start_frame <= fid <= doc.end_frame for fid in frame_ids):
                    package.asr_snippets.append(TextHit(doc=doc, score=0.0))
            for doc in texts.docs_for_video(*video, channel=CHANNEL_OCR):
                if doc.start_frame in frame_ids:
                    package.ocr_texts.append(TextHit(doc=doc, score=0.0))
        if objects is not None:
            for frame in members:
                labels = objects.labels_for(frame.key)
                if labels:
                    package.objects.append((frame.key, labels))
        packages.append(package)
    packages.sort(key=lambda p: (-p.best_fused, p.group_id, p.video_id))
    return packages


def build_answer_prompt(packages: list[EvidencePackage], question: str) -> str:
    lines = [
        ANSWER_TASK,
        "Answer the question from the evidence, then end with one line 'CITED: <frame keys separated by ;>'.",
        f"QUESTION: {question}",
    ]
    for package in packages:
        lines.append(f"VIDEO {package.group_id}/{package.video_id}")
        for frame in package.frames:
            lines.append(f"FRAME {frame.key.text} fused={frame.fused:.4f}")
        for hit in package.asr_snippets:
            lines.append(f"ASR [{hit.doc.start_frame}-{hit.doc.end_frame}]: {hit.doc.text}")
        for hit in package.ocr_texts:
            lines.append(f"OCR [{hit.doc.start_frame}]: {hit.doc.text}")
        for key, labels in package.objects:
            lines.append(f"OBJECTS {key.text}: {', '.join(labels)}")
    return "\n".join(lines)


@dataclass
class SynthesizedAnswer:
    answer: str
    cited_frames: list[FrameKey]
    warnings: list[str] = field(default_factory=list)


_KEY_PATTERN = re.compile(r"[^\s/;,]+/[^\s/;,]+/\d+")


def synthesize_answer(packages: list[EvidencePackage], question: str, llm: LlmClient) -> SynthesizedAnswer:
    """Grounded answer synthesis: citations not present in the evidence are dropped."""
    if not packages:
        raise ValueError("at least one evidence package is required")
    prompt = build_answer_prompt(packages, question)
    try:
        reply = llm.complete(prompt)
    except TransportError as exc:
        raise SynthesisError(f"answer synthesis failed: {exc}", packages=packages) from exc

    known = {frame.key.text for package in packages for frame in package.frames}
    warnings = []
    cited: list[FrameKey] = []
    for text in _KEY_PATTERN.findall(reply):
        if text in known:
            key = next(f.key for p in packages for f in p.frames if f.key.text == text)
            if key not in cited:
                cited.append(key)
        else:
            warnings.append(f"dropped citation of unknown frame {text!r}")
    answer_lines = [line for line in reply.splitlines() if not line.startswith("CITED:")]
    return SynthesizedAnswer(answer="\n".join(answer_lines).strip(), cited_frames=cited, warnings=warnings)
