"""Query parsing and planning: natural-language query to weighted SearchPlan.

With an LLM, the plan comes from a structured completion validated against
the plan invariants; anything invalid (or any transport failure) falls back
to a deterministic rule path, so planning always succeeds for a non-empty
query. ASR/OCR keywords are kept verbatim from the query text; translation
of the semantic query is entirely the LLM's job.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .clients import LlmClient
from .errors import PlanError, TransportError
from .landmark import LandmarkKB, find_landmark_spans, fold
from .object_index import MODE_OR, ObjectQuery
from .text_index import tokenize

MODALITIES = ("semantic", "asr", "ocr", "object")

PLAN_TASK = "TASK: plan"

DEFAULT_TOP_K = 100

# COCO detection vocabulary; the object modality of the rule path only fires
# when one of these appears in the query.
COCO_LABELS = (
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck", "boat",
    "traffic light", "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat",
    "dog", "horse", "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "backpack",
    "umbrella", "handbag", "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball",
    "kite", "baseball bat", "baseball glove", "skateboard", "surfboard", "tennis racket",
    "bottle", "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana", "apple",
    "sandwich", "orange", "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair",
    "couch", "potted plant", "bed", "dining table", "toilet", "tv", "laptop", "mouse",
    "remote", "keyboard", "cell phone", "microwave", "oven", "toaster", "sink",
    "refrigerator", "book", "clock", "vase", "scissors", "teddy bear", "hair drier",
    "toothbrush",
)


@dataclass(frozen=True)
class ModalityWeights:
    semantic: float = 0.5
    asr: float = 0.2
    ocr: float = 0.2
    object: float = 0.1

    def __post_init__(self) -> None:
        values = self.as_dict()
        for name, value in values.items():
            if value < 0:
                raise ValueError(f"weight {name} must be >= 0, got {value}")
        if all(v == 0 for v in values.values()):
            raise ValueError("at least one modality weight must be > 0")

    def as_dict(self) -> dict[str, float]:
        return {"semantic": self.semantic, "asr": self.asr, "ocr": self.ocr, "object": self.object}

    def get(self, modality: str) -> float:
        return self.as_dict()[modality]


DEFAULT_WEIGHTS = ModalityWeights()


@dataclass(frozen=True)
class SearchPlan:
    """Weighted multi-modality search program for one query."""

    original_query: str
    semantic_query: str
    asr_keywords: tuple[str, ...] = ()
    ocr_keywords: tuple[str, ...] = ()
    object_query: ObjectQuery | None = None
    weights: ModalityWeights = DEFAULT_WEIGHTS
    detected_landmarks: tuple[str, ...] = ()
    top_k_per_modality: int = DEFAULT_TOP_K
    used_llm: bool = False
    warnings: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "original_query": self.original_query,
            "semantic_query": self.semantic_query,
            "asr_keywords": list(self.asr_keywords),
            "ocr_keywords": list(self.ocr_keywords),
            "object_query": (
                {"labels": list(self.object_query.labels), "mode": self.object_query.mode,
                 "min_score": self.object_query.min_score}
                if self.object_query
                else None
            ),
            "weights": self.weights.as_dict(),
            "detected_landmarks": list(self.detected_landmarks),
            "top_k_per_modality": self.top_k_per_modality,
            "used_llm": self.used_llm,
            "warnings": list(self.warnings),
        }


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def validate_plan(plan: SearchPlan, kb: LandmarkKB) -> list[str]:
    """Invariant violations as human-readable strings; empty means valid."""
    problems = []
    if all(v == 0 for v in plan.weights.as_dict().values()):
        problems.append("all modality weights are zero")
    query_folded = fold(_normalize_ws(plan.original_query))
    for label, keywords in (("asr", plan.asr_keywords), ("ocr", plan.ocr_keywords)):
        for keyword in keywords:
            if fold(_normalize_ws(keyword)) not in query_folded:
                problems.append(f"{label} keyword {keyword!r} is not verbatim from the query")
    for name in plan.detected_landmarks:
        if kb.lookup(name) is None:
            problems.append(f"detected landmark {name!r} is not in the knowledge base")
    if plan.top_k_per_modality < 1:
        problems.append(f"top_k_per_modality must be >= 1, got {plan.top_k_per_modality}")
    return problems


_QUOTED = re.compile(r'"([^"]+)"|“([^”]+)”')


def _quoted_phrases(query: str) -> list[str]:
    out = []
    for match in _QUOTED.finditer(query):
        phrase = (match.group(1) or match.group(2) or "").strip()
        if phrase:
            out.append(phrase)
    return out


def _contains_phrase(tokens: list[str], phrase_tokens: list[str]) -> bool:
    n = len(phrase_tokens)
    return any(tokens[i : i + n] == phrase_tokens for i in range(len(tokens) - n + 1))


def _object_query_from_lexicon(query: str) -> ObjectQuery | None:
    tokens = tokenize(query, folded=True)
    found = []
    for label in COCO_LABELS:
        label_tokens = label.split()
        if len(label_tokens) == 1:
            if label in tokens or f"{label}s" in tokens:
                found.append(label)
        elif _contains_phrase(tokens, label_tokens):
            found.append(label)
    if not found:
        return None
    return ObjectQuery(labels=tuple(found), mode=MODE_OR)


def _rule_plan(
    query: str,
    kb: LandmarkKB,
    weights: ModalityWeights,
    top_k: int,
    warnings: tuple[str, ...] = (),
) -> SearchPlan:
    normalized = _normalize_ws(query)
    spans = find_landmark_spans(normalized, kb)
    keywords: list[str] = []
    landmarks: list[str] = []
    for span in spans:
        if span.matched_text not in keywords:
            keywords.append(span.matched_text)
        if span.entry.name not in landmarks:
            landmarks.append(span.entry.name)
    for phrase in _quoted_phrases(normalized):
        if phrase not in keywords:
            keywords.append(phrase)
    return SearchPlan(
        original_query=query,
        semantic_query=query,
        asr_keywords=tuple(keywords),
        ocr_keywords=tuple(keywords),
        object_query=_object_query_from_lexicon(normalized),
        weights=weights,
        detected_landmarks=tuple(landmarks),
        top_k_per_modality=top_k,
        used_llm=False,
        warnings=warnings,
    )


def build_plan_prompt(query: str, kb: LandmarkKB) -> str:
    return "\n".join(
        [
            PLAN_TASK,
            "Turn the video-retrieval query into one JSON object with exactly these fields:",
            'semantic_query (descriptive English), asr_keywords (verbatim strings from the query),',
            'ocr_keywords (verbatim strings), object_labels (COCO labels or []), object_mode ("AND"|"OR"),',
            "weights ({semantic, asr, ocr, object}, non-negative), detected_landmarks (names from the list).",
            "KNOWN LANDMARKS: " + "; ".join(kb.names()),
            f"QUERY: {query}",
        ]
    )


def _first_json_object(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    for start in range(len(text)):
        if text[start] != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def _plan_from_completion(
    query: str, kb: LandmarkKB, reply: str, weights_default: ModalityWeights, top_k: int
) -> SearchPlan | None:
    payload = _first_json_object(reply)
    if payload is None:
        return None
    try:
        raw_weights = payload.get("weights") or {}
        weights = ModalityWeights(
            semantic=float(raw_weights.get("semantic", weights_default.semantic)),
            asr=float(raw_weights.get("asr", weights_default.asr)),
            ocr=float(raw_weights.get("ocr", weights_default.ocr)),
            object=float(raw_weights.get("object", weights_default.object)),
        )
        labels = [str(v) for v in payload.get("object_labels", []) if str(v).strip()]
        object_query = (
            ObjectQuery(labels=tuple(labels), mode=str(payload.get("object_mode", MODE_OR)))
            if labels
            else None
        )
        landmarks = []
        for name in payload.get("detected_landmarks", []):
            entry = kb.lookup(str(name))
            if entry is None:
                return None
            if entry.name not in landmarks:
                landmarks.append(entry.name)
        plan = SearchPlan(
            original_query=query,
            semantic_query=str(payload.get("semantic_query") or query),
            asr_keywords=tuple(str(v) for v in payload.get("asr_keywords", [])),
            ocr_keywords=tuple(str(v) for v in payload.get("ocr_keywords", [])),
            object_query=object_query,
            weights=weights,
            detected_landmarks=tuple(landmarks),
            top_k_per_modality=top_k,
            used_llm=True,
        )
    except (TypeError, ValueError):
        return None
    if validate_plan(plan, kb):
        return None
    return plan


def build_plan(
    query: str,
    kb: LandmarkKB,
    llm: LlmClient | None = None,
    weights: ModalityWeights | None = None,
    top_k: int = DEFAULT_TOP_K,
) -> SearchPlan:
    """Build a SearchPlan via the LLM when available, else the rule path.

    The rule path is fully deterministic: landmark mentions and quoted phrases
    become verbatim ASR/OCR keywords, COCO nouns become an OR object filter,
    and the semantic query passes through untranslated.
    """
    if not query or not query.strip():
        raise PlanError("query must be non-empty")
    weights = weights or DEFAULT_WEIGHTS
    if llm is not None:
        try:
            reply = llm.complete(build_plan_prompt(query, kb))
        except TransportError as exc:
            return _rule_plan(query, kb, weights, top_k, warnings=(f"plan LLM unavailable: {exc}",))
        plan = _plan_from_completion(query, kb, reply, weights, top_k)
        if plan is not None:
            return plan
        return _rule_plan(query, kb, weights, top_k, warnings=("plan completion invalid; used rule path",))
    return _rule_plan(query, kb, weights, top_k)
