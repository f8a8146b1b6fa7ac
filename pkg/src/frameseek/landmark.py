"""Landmark knowledge base, detection, query enhancement, and image-to-image retrieval.

Landmark names are matched case- and diacritic-insensitively so Vietnamese
and non-accent spellings hit the same entry. Enhancement swaps a detected
name in the semantic query for the entry's visual description, which CLIP-style
embeddings match far better than a proper noun.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING

from .clients import EmbeddingClient, ImageSearchClient, LlmClient
from .errors import KnowledgeBaseError, PipelineError, TransportError
from .ocr import strip_diacritics
from .vector_index import VectorHit, VectorIndex

if TYPE_CHECKING:
    from .planner import SearchPlan

logger = logging.getLogger(__name__)

IMAGE_QUERY_TASK = "TASK: image_queries"


@dataclass(frozen=True)
class LandmarkEntry:
    name: str
    visual_description: str
    aliases: tuple[str, ...] = ()
    city: str | None = None

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise KnowledgeBaseError("landmark name must be non-empty")
        if not self.visual_description.strip():
            raise KnowledgeBaseError(f"{self.name!r}: visual_description must be non-empty")

    def surface_forms(self) -> list[str]:
        return [self.name, *self.aliases]


def fold(text: str) -> str:
    """Case- and diacritic-insensitive comparison form (length not preserved)."""
    return "".join(_fold_char(ch) for ch in text)


def _fold_char(ch: str) -> str:
    return strip_diacritics(ch).casefold()


def fold_with_offsets(text: str) -> tuple[str, list[int]]:
    """Folded text plus a map from each folded character back to its source index."""
    parts: list[str] = []
    offsets: list[int] = []
    for i, ch in enumerate(text):
        folded = _fold_char(ch)
        parts.append(folded)
        offsets.extend([i] * len(folded))
    return "".join(parts), offsets


class LandmarkKB:
    """Curated landmark entries with unique names and collision-free aliases."""

    def __init__(self, entries: list[LandmarkEntry]):
        self.entries = list(entries)
        self._by_form: dict[str, LandmarkEntry] = {}
        for entry in self.entries:
            for form in entry.surface_forms():
                folded = fold(form)
                other = self._by_form.get(folded)
                if other is not None and other is not entry:
                    raise KnowledgeBaseError(
                        f"surface form {form!r} of {entry.name!r} collides with entry {other.name!r}"
                    )
                self._by_form[folded] = entry

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, name_or_alias: str) -> LandmarkEntry | None:
        return self._by_form.get(fold(name_or_alias))

    def names(self) -> list[str]:
        return [entry.name for entry in self.entries]


def load_kb(path: str | Path) -> LandmarkKB:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict) or "landmarks" not in payload:
        raise KnowledgeBaseError(f"{path}: expected an object with a 'landmarks' list")
    entries = []
    for record in payload["landmarks"]:
        entries.append(
            LandmarkEntry(
                name=record["name"],
                visual_description=record["visual_description"],
                aliases=tuple(record.get("aliases", [])),
                city=record.get("city"),
            )
        )
    return LandmarkKB(entries)


def default_kb() -> LandmarkKB:
    from importlib import resources

    with resources.files("frameseek.resources").joinpath("landmarks.json").open("r", encoding="utf-8") as handle:
        payload = json.load(handle)
    return LandmarkKB(
        [
            LandmarkEntry(
                name=record["name"],
                visual_description=record["visual_description"],
                aliases=tuple(record.get("aliases", [])),
                city=record.get("city"),
            )
            for record in payload["landmarks"]
        ]
    )


@dataclass(frozen=True)
class LandmarkSpan:
    start: int
    end: int
    entry: LandmarkEntry
    matched_text: str


def find_landmark_spans(text: str, kb: LandmarkKB) -> list[LandmarkSpan]:
    """All landmark mentions in the text; overlaps resolved longest-match-wins."""
    folded_text, offsets = fold_with_offsets(text)
    raw_matches: list[tuple[int, int, LandmarkEntry]] = []
    for entry in kb.entries:
        for form in entry.surface_forms():
            needle = fold(form)
            if not needle:
                continue
            search_from = 0
            while True:
                pos = folded_text.find(needle, search_from)
                if pos == -1:
                    break
                start = offsets[pos]
                end = offsets[pos + len(needle) - 1] + 1
                raw_matches.append((start, end, entry))
                search_from = pos + 1
    # Longest span wins an overlap; earlier start then entry order break ties.
    order = {id(e): i for i, e in enumerate(kb.entries)}
    raw_matches.sort(key=lambda m: (-(m[1] - m[0]), m[0], order[id(m[2])]))
    chosen: list[tuple[int, int, LandmarkEntry]] = []
    for start, end, entry in raw_matches:
        if any(start < c_end and c_start < end for c_start, c_end, _ in chosen):
            continue
        chosen.append((start, end, entry))
    chosen.sort(key=lambda m: m[0])
    return [LandmarkSpan(start, end, entry, text[start:end]) for start, end, entry in chosen]


def detect_landmarks(query: str, kb: LandmarkKB) -> list[str]:
    """Canonical names of landmarks mentioned in the query, in query order."""
    names = []
    for span in find_landmark_spans(query, kb):
        if span.entry.name not in names:
            names.append(span.entry.name)
    return names


def enhance_plan(plan: "SearchPlan", kb: LandmarkKB) -> "SearchPlan":
    """Swap detected landmark names in the semantic query for visual descriptions.

    ASR/OCR keywords keep the verbatim names. Idempotent: descriptions never
    mention the name, so a second pass finds nothing to replace.
    """
    warnings = list(plan.warnings)
    known: set[str] = set()
    for name in plan.detected_landmarks:
        if kb.lookup(name) is None:
            warnings.append(f"landmark {name!r} not in knowledge base; left unmodified")
        else:
            known.add(kb.lookup(name).name)
    semantic = plan.semantic_query
    spans = [s for s in find_landmark_spans(semantic, kb) if s.entry.name in known]
    for span in sorted(spans, key=lambda s: -s.start):
        semantic = semantic[: span.start] + span.entry.visual_description + semantic[span.end :]
    return replace(plan, semantic_query=semantic, warnings=tuple(warnings))


def build_image_query_prompt(entry: LandmarkEntry, n: int) -> str:
    lines = [
        IMAGE_QUERY_TASK,
        f"Write {n} short web image search queries that retrieve clear photos of the landmark.",
        "Reply as a numbered list; every query must mention the landmark by name.",
        f"LANDMARK: {entry.name}",
    ]
    if entry.city:
        lines.append(f"CITY: {entry.city}")
    lines.append(f"LOOKS LIKE: {entry.visual_description}")
    return "\n".join(lines)


_NUMBERED_QUERY = re.compile(r"^\s*\d+\s*[.)]\s*(.+)$")


def _mentions(entry: LandmarkEntry, text: str) -> bool:
    folded = fold(text)
    return any(fold(form) in folded for form in entry.surface_forms() if form)


def _default_queries(entry: LandmarkEntry) -> list[str]:
    queries = [entry.name]
    if entry.city:
        queries.append(f"{entry.name} {entry.city}")
    return queries


def generate_image_queries(
    query: str,
    kb: LandmarkKB,
    llm: LlmClient | None,
    max_landmarks: int = 2,
    queries_per_landmark: int = 3,
) -> list[tuple[LandmarkEntry, list[str]]]:
    """Detected landmarks paired with web image search strings.

    LLM output lines that fail to mention the landmark are discarded; if none
    survive (or there is no LLM), the name and name+city pair stand in.
    """
    if not query.strip():
        raise PipelineError("query must be non-empty")
    names = detect_landmarks(query, kb)[:max_landmarks]
    out: list[tuple[LandmarkEntry, list[str]]] = []
    for name in names:
        entry = kb.lookup(name)
        queries: list[str] = []
        if llm is not None:
            try:
                reply = llm.complete(build_image_query_prompt(entry, queries_per_landmark))
                for line in reply.splitlines():
                    match = _NUMBERED_QUERY.match(line)
                    if match and _mentions(entry, match.group(1)):
                        queries.append(match.group(1).strip())
            except TransportError as exc:
                logger.warning("image-query generation failed for %r: %s", name, exc)
        if not queries:
            queries = _default_queries(entry)
        out.append((entry, queries[:queries_per_landmark]))
    return out


@dataclass(frozen=True)
class I2IParams:
    per_reference_top_k: int = 50
    max_landmarks: int = 2
    images_per_landmark: int = 3

    def __post_init__(self) -> None:
        for name in ("per_reference_top_k", "max_landmarks", "images_per_landmark"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass
class I2IResult:
    hits: list[VectorHit]
    image_queries: list[tuple[str, list[str]]]
    references: list[str]
    warnings: list[str] = field(default_factory=list)


def i2i_search(
    query: str,
    params: I2IParams,
    kb: LandmarkKB,
    llm: LlmClient | None,
    image_search: ImageSearchClient,
    embedder: EmbeddingClient,
    index: VectorIndex,
) -> I2IResult:
    """Landmark-grounded image-to-image retrieval.

    Generate image queries per detected landmark, fetch reference images, run
    one vector search per reference, then merge: duplicate frames collapse to
    their maximum similarity, and the union is reranked by score.
    """
    generated = generate_image_queries(query, kb, llm, max_landmarks=params.max_landmarks)
    if not generated:
        raise PipelineError("no landmark detected in the query; fall back to semantic text search")

    warnings: list[str] = []
    references: list[str] = []
    for entry, queries in generated:
        per_landmark: list[str] = []
        for search_query in queries:
            if len(per_landmark) >= params.images_per_landmark:
                break
            try:
                fetched = image_search.search_images(search_query, params.images_per_landmark)
            except TransportError as exc:
                warnings.append(f"image search failed for {search_query!r}: {exc}")
                continue
            for ref in fetched:
                if ref not in per_landmark and len(per_landmark) < params.images_per_landmark:
                    per_landmark.append(ref)
        if not per_landmark:
            warnings.append(f"no reference images for landmark {entry.name!r}")
        references.extend(ref for ref in per_landmark if ref not in references)

    if not references:
        raise PipelineError("every reference image fetch failed; fall back to semantic text search")

    best: dict[str, VectorHit] = {}
    searched = 0
    for ref in references:
        try:
            vector = embedder.embed_image(ref)
            hits = index.search(vector, k=params.per_reference_top_k)
        except TransportError as exc:
            warnings.append(f"embedding failed for reference {ref!r}: {exc}")
            continue
        searched += 1
        for hit in hits:
            prior = best.get(hit.key.text)
            if prior is None or hit.score > prior.score:
                best[hit.key.text] = hit
    if searched == 0:
        raise PipelineError("no reference image could be embedded; fall back to semantic text search")

    merged = sorted(best.values(), key=lambda h: (-h.score, h.key.text))
    return I2IResult(
        hits=merged,
        image_queries=[(entry.name, queries) for entry, queries in generated],
        references=references,
        warnings=warnings,
    )
