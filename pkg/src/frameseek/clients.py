"""Pluggable clients for external models, with deterministic offline mocks.

Every LLM interaction in the engine (planning, OCR refinement, image-query
generation, answer synthesis) goes through :class:`LlmClient`, so a single
mock covers them all. Prompts start with a ``TASK: <name>`` line; the mock
dispatches on it and computes a reply purely from the prompt text.

Real backends are HTTP clients wrapped in a content-keyed response cache so
recorded sessions replay deterministically; transient failures retry twice
with exponential backoff before surfacing as :class:`TransportError`.
"""

from __future__ import annotations

import hashlib
import re
import threading
import time
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import TransportError

DEFAULT_RETRIES = 2
DEFAULT_BACKOFF = 0.25


@runtime_checkable
class EmbeddingClient(Protocol):
    dimension: int

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_image(self, reference: str) -> np.ndarray: ...


@runtime_checkable
class LlmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


@runtime_checkable
class ImageSearchClient(Protocol):
    def search_images(self, query: str, n: int) -> list[str]: ...


def mock_embed(text: str, dimension: int, seed: str = "") -> np.ndarray:
    """Unit vector derived from a cryptographic hash of the input.

    Identical inputs give bit-identical vectors; distinct inputs collide only
    with hash probability. ``seed`` namespaces vectors per corpus.
    """
    if dimension < 2:
        raise ValueError(f"dimension must be >= 2, got {dimension}")
    digest = hashlib.sha256(f"{seed}\x1f{text}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:16], "big"))
    vector = rng.standard_normal(dimension)
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:  # unreachable in practice; keeps the contract total
        vector[0] = 1.0
        norm = 1.0
    return vector / norm


class MockEmbeddingClient:
    """Deterministic embedder; text and image inputs live in separate namespaces."""

    def __init__(self, dimension: int = 32, seed: str = ""):
        self.dimension = dimension
        self.seed = seed

    def embed_text(self, text: str) -> np.ndarray:
        return mock_embed(f"text:{text}", self.dimension, self.seed)

    def embed_image(self, reference: str) -> np.ndarray:
        return mock_embed(f"image:{reference}", self.dimension, self.seed)


_FRAME_LINE = re.compile(r"^FRAME\s+(\S+)", re.MULTILINE)
_LANDMARK_LINE = re.compile(r"^LANDMARK:\s*(.+)$", re.MULTILINE)
_CITY_LINE = re.compile(r"^CITY:\s*(.+)$", re.MULTILINE)
_NUMBERED = re.compile(r"^[ \t]*\d+[ \t]*[.)].*$", re.MULTILINE)


class MockLlmClient:
    """Pure function of the prompt, keyed on the leading ``TASK:`` directive.

    - refine_ocr: echo the numbered lines unchanged.
    - image_queries: "<name>" and "<name> <city>".
    - answer: template answer citing the first evidence frame.
    - translate: echo the text unchanged.
    - anything else: a fixed non-JSON sentinel, which planner-style callers
      treat as an invalid completion and fall back on.
    """

    def complete(self, prompt: str) -> str:
        task = prompt.splitlines()[0].strip() if prompt else ""
        if task == "TASK: refine_ocr":
            return "\n".join(_NUMBERED.findall(prompt))
        if task == "TASK: image_queries":
            name_match = _LANDMARK_LINE.search(prompt)
            name = name_match.group(1).strip() if name_match else ""
            city_match = _CITY_LINE.search(prompt)
            lines = [f"1. {name}"]
            if city_match:
                lines.append(f"2. {name} {city_match.group(1).strip()}")
            return "\n".join(lines)
        if task == "TASK: answer":
            frame_match = _FRAME_LINE.search(prompt)
            if frame_match:
                key = frame_match.group(1)
                return f"The strongest matching evidence appears at frame {key}.\nCITED: {key}"
            return "No frame evidence was provided.\nCITED:"
        if task == "TASK: translate":
            body = prompt.split("\n", 2)
            return body[2] if len(body) == 3 else ""
        return "NO_STRUCTURED_OUTPUT"


class FixtureImageSearchClient:
    """Exact-match query table over local fixture references."""

    def __init__(self, table: dict[str, Sequence[str]] | None = None):
        self.table = {k: list(v) for k, v in (table or {}).items()}

    def search_images(self, query: str, n: int) -> list[str]:
        if n <= 0:
            return []
        seen = set()
        out = []
        for ref in self.table.get(query, []):
            if ref not in seen:
                seen.add(ref)
                out.append(ref)
            if len(out) >= n:
                break
        return out


class MockImageSearchClient:
    """Synthesizes stable pseudo-references when no fixture table is given."""

    def __init__(self, per_query: int = 3):
        self.per_query = per_query

    def search_images(self, query: str, n: int) -> list[str]:
        if n <= 0:
            return []
        digest = hashlib.sha256(query.encode("utf-8")).hexdigest()[:12]
        return [f"mock://images/{digest}/{i}" for i in range(min(n, self.per_query))]


class CachedLlmClient:
    def __init__(self, inner: LlmClient):
        self.inner = inner
        self._cache: dict[str, str] = {}
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            if prompt in self._cache:
                return self._cache[prompt]
        reply = self.inner.complete(prompt)
        with self._lock:
            self._cache[prompt] = reply
        return reply


class CachedEmbeddingClient:
    def __init__(self, inner: EmbeddingClient):
        self.inner = inner
        self.dimension = inner.dimension
        self._cache: dict[tuple[str, str], np.ndarray] = {}
        self._lock = threading.Lock()

    def _get(self, kind: str, payload: str, fn) -> np.ndarray:
        cache_key = (kind, payload)
        with self._lock:
            if cache_key in self._cache:
                return self._cache[cache_key]
        vector = fn(payload)
        with self._lock:
            self._cache[cache_key] = vector
        return vector

    def embed_text(self, text: str) -> np.ndarray:
        return self._get("text", text, self.inner.embed_text)

    def embed_image(self, reference: str) -> np.ndarray:
        return self._get("image", reference, self.inner.embed_image)


class CachedImageSearchClient:
    def __init__(self, inner: ImageSearchClient):
        self.inner = inner
        self._cache: dict[tuple[str, int], list[str]] = {}
        self._lock = threading.Lock()

    def search_images(self, query: str, n: int) -> list[str]:
        cache_key = (query, n)
        with self._lock:
            if cache_key in self._cache:
                return list(self._cache[cache_key])
        refs = self.inner.search_images(query, n)
        with self._lock:
            self._cache[cache_key] = list(refs)
        return list(refs)


def _with_retries(fn, retries: int = DEFAULT_RETRIES, backoff: float = DEFAULT_BACKOFF, sleep=time.sleep):
    attempts = retries + 1
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            return fn()
        except TransportError:
            raise
        except Exception as exc:  # transport-level failure; retry with backoff
            last = exc
            if attempt < attempts - 1:
                sleep(backoff * (2**attempt))
    raise TransportError(f"request failed after {attempts} attempts: {last}", attempts=attempts)


class HttpLlmClient:
    """POST {prompt} -> {text}; authorization via bearer key."""

    def __init__(self, endpoint: str, api_key: str = "", timeout: float = 30.0, retries: int = DEFAULT_RETRIES):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout
        self.retries = retries

    def complete(self, prompt: str) -> str:
        import httpx

        def call() -> str:
            headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
            response = httpx.post(self.endpoint, json={"prompt": prompt}, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            text = response.json().get("text", "")
            if not text:
                raise TransportError("LLM endpoint returned an empty reply")
            return text

        return _with_retries(call, self.retries)


class HttpEmbeddingClient:
    """POST {input, kind} -> {embedding}; dimension validated on every reply."""

    def __init__(self, endpoint: str, dimension: int, api_key: str = "", timeout: float = 30.0, retries: int = DEFAULT_RETRIES):
        self.endpoint = endpoint
        self.dimension = dimension
        self.api_key = api_key
        self.timeout = timeout
        self.retries = retries

    def _embed(self, payload: str, kind: str) -> np.ndarray:
        import httpx

        def call() -> np.ndarray:
            headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
            response = httpx.post(
                self.endpoint, json={"input": payload, "kind": kind}, headers=headers, timeout=self.timeout
            )
            response.raise_for_status()
            vector = np.asarray(response.json()["embedding"], dtype=np.float64)
            if vector.shape != (self.dimension,):
                raise TransportError(f"endpoint returned dimension {vector.shape}, expected {self.dimension}")
            return vector

        return _with_retries(call, self.retries)

    def embed_text(self, text: str) -> np.ndarray:
        return self._embed(text, "text")

    def embed_image(self, reference: str) -> np.ndarray:
        return self._embed(reference, "image")


class HttpImageSearchClient:
    """GET with q/num params against a custom-search style endpoint."""

    def __init__(self, endpoint: str, api_key: str = "", engine_id: str = "", timeout: float = 30.0, retries: int = DEFAULT_RETRIES):
        self.endpoint = endpoint
        self.api_key = api_key
        self.engine_id = engine_id
        self.timeout = timeout
        self.retries = retries

    def search_images(self, query: str, n: int) -> list[str]:
        if n <= 0:
            return []
        import httpx

        def call() -> list[str]:
            params = {"q": query, "num": n, "searchType": "image"}
            if self.api_key:
                params["key"] = self.api_key
            if self.engine_id:
                params["cx"] = self.engine_id
            response = httpx.get(self.endpoint, params=params, timeout=self.timeout)
            response.raise_for_status()
            items = response.json().get("items", [])
            seen = set()
            refs = []
            for item in items:
                link = item.get("link")
                if link and link not in seen:
                    seen.add(link)
                    refs.append(link)
                if len(refs) >= n:
                    break
            return refs

        return _with_retries(call, self.retries)
