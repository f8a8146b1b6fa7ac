"""BM25-ranked inverted index over ASR segments and OCR entries.

Each document is indexed twice: once as written and once in non-accent form,
so queries match whichever side they arrive on. Scores use Okapi BM25 with
k1=1.2, b=0.75 over lowercase whitespace/punctuation tokenization; no
stemming and no stop-words, since Vietnamese keywords must match verbatim.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass

from .errors import IndexStateError
from .ocr import strip_diacritics

K1 = 1.2
B = 0.75

CHANNEL_ASR = "asr"
CHANNEL_OCR = "ocr"
CHANNELS = (CHANNEL_ASR, CHANNEL_OCR)

# Word characters plus combining-mark blocks, so decomposed Vietnamese text
# tokenizes identically to its precomposed form and spans stay valid.
_TOKEN_RE = re.compile(r"[\ẁ-ͯ᪰-᫿᷀-᷿⃐-⃿]+")


def token_spans(text: str) -> list[tuple[int, int, str]]:
    """(start, end, token) triples over the raw text; spans never overlap."""
    return [(m.start(), m.end(), m.group()) for m in _TOKEN_RE.finditer(text)]


def _norm_raw(token: str) -> str:
    return unicodedata.normalize("NFC", token).lower()


def _norm_folded(token: str) -> str:
    return strip_diacritics(token).lower()


def tokenize(text: str, folded: bool = False) -> list[str]:
    norm = _norm_folded if folded else _norm_raw
    return [norm(tok) for _, _, tok in token_spans(text)]


@dataclass(frozen=True)
class TextDoc:
    """One searchable text unit: an ASR segment or a frame-level OCR entry."""

    doc_id: str
    group_id: str
    video_id: str
    start_frame: int
    end_frame: int
    channel: str
    text: str
    confidence: float | None = None

    def __post_init__(self) -> None:
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if self.start_frame > self.end_frame:
            raise ValueError(f"start_frame {self.start_frame} > end_frame {self.end_frame}")
        if self.channel == CHANNEL_OCR and self.start_frame != self.end_frame:
            raise ValueError("OCR docs are frame-level: start_frame must equal end_frame")
        if not self.text.strip():
            raise ValueError("text must be non-empty after trimming")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def video(self) -> tuple[str, str]:
        return (self.group_id, self.video_id)


@dataclass(frozen=True)
class TextHit:
    doc: TextDoc
    score: float
    highlights: tuple[tuple[int, int], ...] = ()


class _FieldStats:
    """Okapi BM25 statistics for one field over one document universe."""

    def __init__(self) -> None:
        self.tf: dict[str, Counter] = {}
        self.doc_len: dict[str, int] = {}
        self.postings: dict[str, set[str]] = {}
        self.avgdl = 0.0
        self.n = 0

    def add(self, doc_id: str, tokens: list[str]) -> None:
        counts = Counter(tokens)
        self.tf[doc_id] = counts
        self.doc_len[doc_id] = len(tokens)
        for term in counts:
            self.postings.setdefault(term, set()).add(doc_id)

    def finish(self) -> None:
        self.n = len(self.doc_len)
        total = sum(self.doc_len.values())
        self.avgdl = total / self.n if self.n else 0.0

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        if df == 0:
            return 0.0
        return max(0.0, math.log((self.n - df + 0.5) / (df + 0.5)))

    def candidates(self, terms: list[str]) -> set[str]:
        found: set[str] = set()
        for term in terms:
            found |= self.postings.get(term, set())
        return found

    def score(self, doc_id: str, terms: list[str]) -> float:
        counts = self.tf.get(doc_id)
        if not counts:
            return 0.0
        dl = self.doc_len[doc_id]
        score = 0.0
        for term in terms:
            freq = counts.get(term, 0)
            if freq == 0:
                continue
            denom = freq + K1 * (1.0 - B + B * dl / self.avgdl)
            score += self.idf(term) * freq * (K1 + 1.0) / denom
        return score


def _unique(terms: list[str]) -> list[str]:
    seen = set()
    out = []
    for term in terms:
        if term not in seen:
            seen.add(term)
            out.append(term)
    return out


class TextIndex:
    """Build-then-freeze inverted index; searches are read-only and concurrent."""

    def __init__(self) -> None:
        self._docs: dict[str, TextDoc] = {}
        self._frozen = False
        # Universe key: channel name or None for all channels.
        self._fields: dict[tuple[str | None, str], _FieldStats] = {}

    def __len__(self) -> int:
        return len(self._docs)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def index_document(self, doc: TextDoc) -> None:
        if self._frozen:
            raise IndexStateError("index is frozen; no further documents accepted")
        self._docs[doc.doc_id] = doc

    def freeze(self) -> None:
        """Compute BM25 statistics; the result is independent of insertion order."""
        self._fields = {}
        for universe in (None, CHANNEL_ASR, CHANNEL_OCR):
            for kind in ("raw", "folded"):
                self._fields[(universe, kind)] = _FieldStats()
        for doc_id in sorted(self._docs):
            doc = self._docs[doc_id]
            raw = tokenize(doc.text, folded=False)
            folded = tokenize(doc.text, folded=True)
            for universe in (None, doc.channel):
                self._fields[(universe, "raw")].add(doc_id, raw)
                self._fields[(universe, "folded")].add(doc_id, folded)
        for stats in self._fields.values():
            stats.finish()
        self._frozen = True

    def _highlights(self, doc: TextDoc, raw_terms: set[str], folded_terms: set[str]) -> tuple[tuple[int, int], ...]:
        spans = []
        for start, end, token in token_spans(doc.text):
            if _norm_raw(token) in raw_terms or _norm_folded(token) in folded_terms:
                spans.append((start, end))
        return tuple(spans)

    def search_text(self, query: str, channel: str | None = None, k: int = 10) -> list[TextHit]:
        """Top-k BM25 hits; ties break on doc_id. Hit score is the better of the
        as-written and non-accent fields, so either query form matches."""
        if not self._frozen:
            raise IndexStateError("freeze() the index before searching")
        if channel is not None and channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {channel!r}")
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        raw_terms = _unique(tokenize(query, folded=False))
        folded_terms = _unique(tokenize(query, folded=True))
        raw_field = self._fields[(channel, "raw")]
        folded_field = self._fields[(channel, "folded")]
        doc_ids = raw_field.candidates(raw_terms) | folded_field.candidates(folded_terms)
        hits = []
        raw_set, folded_set = set(raw_terms), set(folded_terms)
        for doc_id in doc_ids:
            doc = self._docs[doc_id]
            score = max(raw_field.score(doc_id, raw_terms), folded_field.score(doc_id, folded_terms))
            hits.append(TextHit(doc=doc, score=score, highlights=self._highlights(doc, raw_set, folded_set)))
        hits.sort(key=lambda h: (-h.score, h.doc.doc_id))
        return hits[:k]

    def docs_for_video(self, group_id: str, video_id: str, channel: str | None = None) -> list[TextDoc]:
        out = [
            doc
            for doc in self._docs.values()
            if doc.group_id == group_id and doc.video_id == video_id and (channel is None or doc.channel == channel)
        ]
        out.sort(key=lambda d: (d.start_frame, d.end_frame, d.doc_id))
        return out

    def channel_count(self, channel: str) -> int:
        return sum(1 for doc in self._docs.values() if doc.channel == channel)
