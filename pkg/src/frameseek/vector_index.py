"""Exact in-process cosine-similarity index over keyframe embeddings.

Vectors are L2-normalized at insert, so similarity is a plain dot product.
The index is built, frozen, then searched; frozen state is immutable and
safe for concurrent queries. Search is a full scan — exact by construction,
fast enough at catalog scale, and trivially testable against brute force.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .catalog import FrameKey, parse_frame_key
from .errors import IndexStateError, IngestError, InvalidVectorError

MAGIC = b"FSKV1\n"


def normalize(vector: Sequence[float]) -> np.ndarray:
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidVectorError(f"expected a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidVectorError("vector contains NaN or Inf")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise InvalidVectorError("zero vector cannot be normalized")
    return arr / norm


class VectorHit:
    """One search result: a frame key and its cosine similarity."""

    __slots__ = ("key", "score")

    def __init__(self, key: FrameKey, score: float):
        self.key = key
        self.score = score

    def __repr__(self) -> str:
        return f"VectorHit({self.key.text}, {self.score:.6f})"

    def __eq__(self, other) -> bool:
        return isinstance(other, VectorHit) and self.key == other.key and self.score == other.score


class VectorIndex:
    """Fixed-dimension store of normalized embeddings with exact top-k search."""

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self.dimension = dimension
        self._pending: dict[str, np.ndarray] = {}
        self._keys: list[FrameKey] = []
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._keys) if self.frozen else len(self._pending)

    @property
    def frozen(self) -> bool:
        return self._matrix is not None

    def add_embedding(self, key: FrameKey, vector: Sequence[float]) -> None:
        """Normalize and store; a duplicate key replaces the prior vector."""
        if self.frozen:
            raise IndexStateError("index is frozen; no further embeddings accepted")
        arr = np.asarray(vector, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != self.dimension:
            raise InvalidVectorError(
                f"vector has dimension {arr.shape[0] if arr.ndim == 1 else arr.shape}, index expects {self.dimension}"
            )
        self._pending[key.text] = normalize(arr)

    def freeze(self) -> None:
        """Stack vectors into one matrix, rows sorted by canonical key text.

        Row order is the tie-break order, so equal scores list in key order
        regardless of insertion sequence.
        """
        texts = sorted(self._pending)
        self._keys = [parse_frame_key(t) for t in texts]
        if texts:
            self._matrix = np.vstack([self._pending[t] for t in texts])
        else:
            self._matrix = np.empty((0, self.dimension), dtype=np.float64)
        self._pending = {}

    def items(self) -> list[tuple[FrameKey, np.ndarray]]:
        """Stored (key, normalized vector) pairs in canonical key order."""
        if not self.frozen:
            raise IndexStateError("freeze() the index before iterating")
        return [(key, self._matrix[i]) for i, key in enumerate(self._keys)]

    def search(
        self,
        query_vector: Sequence[float],
        k: int,
        scope_filter: Callable[[FrameKey], bool] | None = None,
    ) -> list[VectorHit]:
        """Exact cosine top-k over the (optionally filtered) stored set."""
        if not self.frozen:
            raise IndexStateError("freeze() the index before searching")
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        arr = np.asarray(query_vector, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != self.dimension:
            raise InvalidVectorError(
                f"query has dimension {arr.shape[0] if arr.ndim == 1 else arr.shape}, index expects {self.dimension}"
            )
        if len(self._keys) == 0:
            return []
        query = normalize(arr)
        scores = self._matrix @ query
        if scope_filter is not None:
            indices = [i for i, key in enumerate(self._keys) if scope_filter(key)]
            if not indices:
                return []
            scores = scores[indices]
            keys = [self._keys[i] for i in indices]
        else:
            keys = self._keys
        # Rows are in canonical key order; a stable sort on -score keeps exact
        # ties in that order.
        order = np.argsort(-scores, kind="stable")[:k]
        return [VectorHit(keys[i], float(scores[i])) for i in order]

    def save(self, path: str | Path) -> None:
        """Binary layout: magic, u32 dimension, u32 count, float32 LE rows;
        sidecar ``<path>.keys`` holds canonical key text in row order."""
        if not self.frozen:
            raise IndexStateError("freeze() the index before saving")
        path = Path(path)
        with open(path, "wb") as handle:
            handle.write(MAGIC)
            handle.write(struct.pack("<II", self.dimension, len(self._keys)))
            handle.write(self._matrix.astype("<f4").tobytes())
        with open(path.with_suffix(path.suffix + ".keys"), "w", encoding="utf-8") as handle:
            for key in self._keys:
                handle.write(key.text + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        path = Path(path)
        with open(path, "rb") as handle:
            magic = handle.read(len(MAGIC))
            if magic != MAGIC:
                raise IngestError("bad magic bytes; not a vector index file", path=str(path), offset=0)
            header = handle.read(8)
            if len(header) != 8:
                raise IngestError("truncated header", path=str(path), offset=len(MAGIC))
            dimension, count = struct.unpack("<II", header)
            payload = handle.read()
        expected = dimension * count * 4
        if len(payload) != expected:
            raise IngestError(
                f"expected {expected} payload bytes for {count}x{dimension}, found {len(payload)}",
                path=str(path),
                offset=len(MAGIC) + 8,
            )
        keys_path = path.with_suffix(path.suffix + ".keys")
        try:
            key_lines = keys_path.read_text(encoding="utf-8").splitlines()
        except FileNotFoundError as exc:
            raise IngestError("missing sidecar key list", path=str(keys_path)) from exc
        if len(key_lines) != count:
            raise IngestError(f"sidecar lists {len(key_lines)} keys, header says {count}", path=str(keys_path))
        index = cls(dimension)
        matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dimension).astype(np.float64)
        for text, row in zip(key_lines, matrix):
            index.add_embedding(parse_frame_key(text), row)
        index.freeze()
        return index


def load_embeddings_jsonl(path: str | Path, index: VectorIndex) -> int:
    """Ingest line-delimited {key, vector} records; returns the count added."""
    import json

    added = 0
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
                key = parse_frame_key(record["key"])
                vector = record["vector"]
            except Exception as exc:
                raise IngestError(f"bad embedding record: {exc}", path=str(path), line=lineno) from exc
            index.add_embedding(key, vector)
            added += 1
    return added
