"""Vietnamese OCR text handling: diacritic stripping and LLM batch refinement.

Raw OCR output frequently carries misplaced or missing diacritics, so every
entry is normalized to a non-accent form first; an LLM pass then restores
diacritics and cleans noise in numbered batches. Refinement is an ingestion
step, not a query-time one.
"""

from __future__ import annotations

import logging
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .catalog import FrameKey
from .errors import TransportError

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 20

REFINE_TASK = "TASK: refine_ocr"

_NUMBERED_LINE = re.compile(r"^\s*(\d+)\s*[.)]\s*(.*)$")


def strip_diacritics(text: str) -> str:
    """Remove combining marks and map đ/Đ to d/D; other characters pass through.

    Canonical decomposition first, so both precomposed and decomposed input
    normalize to the same non-accent form. Idempotent.
    """
    decomposed = unicodedata.normalize("NFD", text)
    kept = "".join(ch for ch in decomposed if unicodedata.category(ch) != "Mn")
    kept = kept.replace("đ", "d").replace("Đ", "D")
    return unicodedata.normalize("NFC", kept)


@dataclass(frozen=True)
class OcrEntry:
    """One OCR detection tied to a keyframe."""

    key: FrameKey
    text_raw: str
    text_nonaccent: str
    confidence: float
    text_refined: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def make_entry(key: FrameKey, text_raw: str, confidence: float) -> OcrEntry:
    return OcrEntry(key=key, text_raw=text_raw, text_nonaccent=strip_diacritics(text_raw), confidence=confidence)


def build_refine_prompt(texts: list[str]) -> str:
    lines = [
        REFINE_TASK,
        "Restore Vietnamese diacritics, fix spelling, and remove OCR noise in the numbered lines.",
        "Reply with the same numbered lines, one corrected text per line, nothing else.",
        "",
    ]
    lines += [f"{i}. {text}" for i, text in enumerate(texts, 1)]
    return "\n".join(lines)


def parse_refine_reply(reply: str, expected: int) -> dict[int, str]:
    """Map 1-based line numbers to corrected texts; lines outside range are dropped."""
    out: dict[int, str] = {}
    for raw in reply.splitlines():
        match = _NUMBERED_LINE.match(raw)
        if not match:
            continue
        number = int(match.group(1))
        if 1 <= number <= expected:
            out[number] = match.group(2).strip()
    return out


def refine_batch(entries, llm, batch_size: int = DEFAULT_BATCH_SIZE, parallelism: int = 1):
    """Fill ``text_refined`` on every entry via numbered-list LLM prompts.

    Entries are split into batches of at most ``batch_size``; each batch is one
    prompt and one completion. A reply line that cannot be parsed leaves that
    entry refined as its non-accent text, and a transport failure downgrades
    the whole batch the same way (logged per batch, never per entry). Output
    preserves input length, order, keys, and confidences.
    """
    entries = list(entries)
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if not entries:
        return []

    batches = [entries[i : i + batch_size] for i in range(0, len(entries), batch_size)]

    def run(batch: list[OcrEntry]) -> list[OcrEntry]:
        texts = [e.text_nonaccent for e in batch]
        try:
            reply = llm.complete(build_refine_prompt(texts))
        except TransportError as exc:
            logger.warning("OCR refine batch of %d entries fell back to non-accent text: %s", len(batch), exc)
            return [replace(e, text_refined=e.text_nonaccent) for e in batch]
        parsed = parse_refine_reply(reply, expected=len(batch))
        out = []
        for i, entry in enumerate(batch, 1):
            refined = parsed.get(i)
            if refined is None or not refined.strip():
                refined = entry.text_nonaccent
            out.append(replace(entry, text_refined=refined))
        return out

    if parallelism > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            refined_batches = list(pool.map(run, batches))
    else:
        refined_batches = [run(batch) for batch in batches]

    return [entry for batch in refined_batches for entry in batch]
