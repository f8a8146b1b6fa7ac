"""Single-process retrieval engine: ingestion, capability tracking, and dispatch.

All indices live in memory and freeze after ingestion, so request handling
needs no locking and identical requests return identical responses (timing
aside). Modes whose data files are missing are disabled and reported in the
capability map rather than failing startup.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import ocr as ocr_mod
from .catalog import Catalog, FrameKey, load_shots, load_video_meta, parse_frame_key
from .clients import (
    CachedEmbeddingClient,
    CachedImageSearchClient,
    CachedLlmClient,
    FixtureImageSearchClient,
    HttpEmbeddingClient,
    HttpImageSearchClient,
    HttpLlmClient,
    MockEmbeddingClient,
    MockImageSearchClient,
    MockLlmClient,
)
from .config import EngineConfig
from .errors import CapabilityError, IngestError, SynthesisError
from .landmark import I2IParams, I2IResult, LandmarkKB, default_kb, enhance_plan, i2i_search, load_kb
from .object_index import ObjectQuery, ObjectStore
from .orchestrator import (
    ScoredFrame,
    execute_plan,
    fuse,
    group_by_video,
    synthesize_answer,
    temporal_search,
)
from .planner import ModalityWeights, build_plan
from .text_index import CHANNEL_ASR, CHANNEL_OCR, TextDoc, TextHit, TextIndex
from .vector_index import MAGIC, VectorIndex

logger = logging.getLogger(__name__)

MODES = ("semantic", "ocr", "asr", "object", "llandmark", "i2i", "temporal")

TRANSLATE_TASK = "TASK: translate"


@dataclass
class BuildReport:
    counts: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    capabilities: dict[str, bool] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"counts": self.counts, "warnings": self.warnings, "capabilities": self.capabilities}


class Engine:
    def __init__(self, config: EngineConfig):
        self.config = config
        self.catalog = Catalog()
        self.vectors: VectorIndex | None = None
        self.texts = TextIndex()
        self.objects: ObjectStore | None = None
        self.kb: LandmarkKB | None = None
        self.report = BuildReport()
        self._build_clients()

    # -- clients -----------------------------------------------------------

    def _build_clients(self) -> None:
        cfg = self.config
        if cfg.mock_mode:
            self.embedder = MockEmbeddingClient(dimension=cfg.embedding_dimension, seed=cfg.mock_seed)
            self.llm = MockLlmClient()
            if cfg.image_fixtures:
                self.image_search = FixtureImageSearchClient(cfg.image_fixtures)
            else:
                self.image_search = MockImageSearchClient(per_query=cfg.i2i_images_per_landmark)
            # Mock planning uses the deterministic rule path.
            self.plan_llm = None
            return
        self.embedder = (
            CachedEmbeddingClient(HttpEmbeddingClient(cfg.embed_endpoint, cfg.embedding_dimension, cfg.embed_api_key))
            if cfg.embed_endpoint
            else None
        )
        self.llm = CachedLlmClient(HttpLlmClient(cfg.llm_endpoint, cfg.llm_api_key)) if cfg.llm_endpoint else None
        self.plan_llm = self.llm
        if cfg.image_fixtures:
            self.image_search = FixtureImageSearchClient(cfg.image_fixtures)
        elif cfg.img_search_endpoint:
            self.image_search = CachedImageSearchClient(
                HttpImageSearchClient(cfg.img_search_endpoint, cfg.img_search_key, cfg.img_search_engine_id)
            )
        else:
            self.image_search = None

    # -- ingestion ---------------------------------------------------------

    def ingest(self, count_objects: bool = False) -> BuildReport:
        """Build and freeze every index the configuration provides data for."""
        cfg = self.config
        report = BuildReport()
        video_filter = cfg.video_filter()

        def exists(path: str | None, label: str) -> bool:
            if not path:
                return False
            if not Path(path).exists():
                report.warnings.append(f"{label} file missing: {path}")
                return False
            return True

        if exists(cfg.videos_path, "video metadata"):
            load_video_meta(cfg.videos_path, self.catalog, video_filter)
        if exists(cfg.shots_path, "shots"):
            load_shots(cfg.shots_path, self.catalog, video_filter)
        counts = self.catalog.counts
        report.counts["videos"] = counts.videos
        report.counts["shots"] = counts.shots
        report.counts["keyframes"] = counts.keyframes

        if exists(cfg.embeddings_path, "embeddings"):
            self.vectors = self._load_vectors(Path(cfg.embeddings_path), video_filter)
            report.counts["embeddings"] = len(self.vectors)

        if exists(cfg.asr_path, "ASR"):
            report.counts["asr_docs"] = self._load_asr(cfg.asr_path, video_filter, report)
        if exists(cfg.ocr_path, "OCR"):
            report.counts["ocr_docs"] = self._load_ocr(cfg.ocr_path, video_filter, report)
        self.texts.freeze()

        if exists(cfg.objects_path, "object detections"):
            self.objects = ObjectStore(cfg.objects_path, video_filter=video_filter)
            if count_objects:
                report.counts["object_frames"] = self.objects.frame_count()
                report.counts["detections"] = self.objects.detection_count()

        if cfg.landmarks_path:
            if Path(cfg.landmarks_path).exists():
                self.kb = load_kb(cfg.landmarks_path)
            else:
                report.warnings.append(f"landmark KB file missing: {cfg.landmarks_path}")
        if self.kb is None:
            self.kb = default_kb()
        report.counts["landmarks"] = len(self.kb)

        report.capabilities = self.capabilities()
        self.report = report
        for warning in report.warnings:
            logger.warning("%s", warning)
        return report

    def _load_vectors(self, path: Path, video_filter) -> VectorIndex:
        with open(path, "rb") as handle:
            is_binary = handle.read(len(MAGIC)) == MAGIC
        if is_binary:
            index = VectorIndex.load(path)
            if video_filter is None:
                return index
            filtered = VectorIndex(index.dimension)
            for key, vector in index.items():
                if video_filter(key.group_id, key.video_id):
                    filtered.add_embedding(key, vector)
            filtered.freeze()
            return filtered
        index = VectorIndex(self.config.embedding_dimension)
        count = 0
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, 1):
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    record = json.loads(raw)
                    key = parse_frame_key(record["key"])
                except Exception as exc:
                    raise IngestError(f"bad embedding record: {exc}", path=str(path), line=lineno) from exc
                if video_filter is not None and not video_filter(key.group_id, key.video_id):
                    continue
                index.add_embedding(key, record["vector"])
                count += 1
        index.freeze()
        return index

    def _load_asr(self, path: str, video_filter, report: BuildReport) -> int:
        count = 0
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, 1):
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    record = json.loads(raw)
                    doc = TextDoc(
                        doc_id=f"asr:{lineno}",
                        group_id=str(record["group_id"]),
                        video_id=str(record["video_id"]),
                        start_frame=int(record["start_frame"]),
                        end_frame=int(record["end_frame"]),
                        channel=CHANNEL_ASR,
                        text=str(record["text"]),
                    )
                except Exception as exc:
                    raise IngestError(f"bad ASR record: {exc}", path=path, line=lineno) from exc
                if video_filter is not None and not video_filter(doc.group_id, doc.video_id):
                    continue
                self.texts.index_document(doc)
                count += 1
        return count

    def _load_ocr(self, path: str, video_filter, report: BuildReport) -> int:
        entries = []
        recorded = []
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, 1):
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    record = json.loads(raw)
                    key = FrameKey(str(record["group_id"]), str(record["video_id"]), int(record["frame_id"]))
                    entry = ocr_mod.OcrEntry(
                        key=key,
                        text_raw=str(record["text_raw"]),
                        text_nonaccent=ocr_mod.strip_diacritics(str(record["text_raw"])),
                        confidence=float(record.get("confidence", 1.0)),
                        text_refined=record.get("text_refined"),
                    )
                except Exception as exc:
                    raise IngestError(f"bad OCR record: {exc}", path=path, line=lineno) from exc
                if video_filter is not None and not video_filter(key.group_id, key.video_id):
                    continue
                entries.append(entry)
                recorded.append(lineno)

        needs_refine = [e for e in entries if e.text_refined is None]
        if needs_refine and self.config.refine_ocr and self.llm is not None:
            refined = ocr_mod.refine_batch(needs_refine, self.llm)
            by_id = {id(orig): new for orig, new in zip(needs_refine, refined)}
            entries = [by_id.get(id(e), e) for e in entries]

        for lineno, entry in zip(recorded, entries):
            text = entry.text_refined or entry.text_raw
            self.texts.index_document(
                TextDoc(
                    doc_id=f"ocr:{lineno}",
                    group_id=entry.key.group_id,
                    video_id=entry.key.video_id,
                    start_frame=entry.key.frame_id,
                    end_frame=entry.key.frame_id,
                    channel=CHANNEL_OCR,
                    text=text,
                    confidence=entry.confidence,
                )
            )
        return len(entries)

    # -- capabilities ------------------------------------------------------

    def capabilities(self) -> dict[str, bool]:
        semantic = self.embedder is not None and self.vectors is not None and len(self.vectors) > 0
        asr = self.texts.frozen and self.texts.channel_count(CHANNEL_ASR) > 0
        ocr_cap = self.texts.frozen and self.texts.channel_count(CHANNEL_OCR) > 0
        obj = self.objects is not None
        kb = self.kb is not None and len(self.kb) > 0
        return {
            "semantic": semantic,
            "asr": asr,
            "ocr": ocr_cap,
            "object": obj,
            "llandmark": semantic and kb and self.llm is not None,
            "i2i": semantic and kb and self.image_search is not None,
            "temporal": semantic,
            "mock_mode": self.config.mock_mode,
        }

    def _require(self, mode: str) -> None:
        caps = self.capabilities()
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; allowed: {', '.join(MODES)}")
        if not caps.get(mode, False):
            raise CapabilityError(f"mode {mode!r} is disabled (missing data or clients)", capabilities=caps)

    # -- serialization helpers ----------------------------------------------

    def _seconds(self, key: FrameKey) -> float | None:
        meta = self.catalog.meta_for(key.video)
        if meta is None:
            return None
        if key.frame_id >= meta.frame_count:
            return None
        return key.frame_id / meta.fps

    def _frame_row(self, key: FrameKey, score: float) -> dict:
        return {
            "key": key.text,
            "group_id": key.group_id,
            "video_id": key.video_id,
            "frame_id": key.frame_id,
            "score": score,
            "seconds": self._seconds(key),
        }

    def _text_row(self, hit: TextHit) -> dict:
        return {
            "doc_id": hit.doc.doc_id,
            "group_id": hit.doc.group_id,
            "video_id": hit.doc.video_id,
            "start_frame": hit.doc.start_frame,
            "end_frame": hit.doc.end_frame,
            "channel": hit.doc.channel,
            "text": hit.doc.text,
            "score": hit.score,
            "highlights": [list(span) for span in hit.highlights],
        }

    def _scored_frame_row(self, frame: ScoredFrame) -> dict:
        row = self._frame_row(frame.key, frame.fused)
        row["fused"] = frame.fused
        row["per_modality"] = {m: frame.per_modality[m] for m in sorted(frame.per_modality)}
        del row["score"]
        return row

    def _scope_filter(self, include: list[str] | None, exclude: list[str] | None):
        if not include and not exclude:
            return None
        include_set = set(include or [])
        exclude_set = set(exclude or [])

        def accept(key: FrameKey) -> bool:
            names = (key.group_id, f"{key.group_id}/{key.video_id}")
            if any(n in exclude_set for n in names):
                return False
            if include_set and not any(n in include_set for n in names):
                return False
            return True

        return accept

    # -- search ------------------------------------------------------------

    def search(
        self,
        mode: str,
        query: str,
        k: int | None = None,
        weights: ModalityWeights | None = None,
        include: list[str] | None = None,
        exclude: list[str] | None = None,
        translate: bool = False,
        object_mode: str = "OR",
        min_score: float = 0.0,
    ) -> dict:
        started = time.perf_counter()
        k = k or self.config.default_k
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self._require(mode)
        scope = self._scope_filter(include, exclude)
        if translate and self.llm is not None and mode in ("semantic", "llandmark"):
            query = self.llm.complete(f"{TRANSLATE_TASK}\nTranslate to descriptive English.\n{query}")

        response: dict = {"mode": mode, "query": query, "k": k}
        if mode == "semantic":
            vector = self.embedder.embed_text(query)
            hits = self.vectors.search(vector, k=k, scope_filter=scope)
            response["results"] = [self._frame_row(h.key, h.score) for h in hits]
        elif mode in ("asr", "ocr"):
            hits = self.texts.search_text(query, channel=mode, k=k)
            if scope is not None:
                hits = [h for h in hits if scope(FrameKey(h.doc.group_id, h.doc.video_id, max(0, h.doc.start_frame)))]
            response["results"] = [self._text_row(h) for h in hits]
        elif mode == "object":
            # Commas separate labels when present, so multi-word COCO labels
            # ("traffic light") survive; otherwise whitespace separates.
            if "," in query:
                labels = [part.strip() for part in query.split(",") if part.strip()]
            else:
                labels = query.split()
            object_query = ObjectQuery(labels=tuple(labels), mode=object_mode, min_score=min_score)
            results = self.objects.filter_frames(object_query, k=k)
            if scope is not None:
                results = [(key, count) for key, count in results if scope(key)]
            response["results"] = [dict(self._frame_row(key, float(count)), matched_count=count) for key, count in results]
        elif mode == "llandmark":
            response.update(self._llandmark(query, k, weights, scope))
        else:
            raise ValueError(f"mode {mode!r} is not handled by search(); use temporal()/i2i()")

        response["capabilities"] = self.capabilities()
        response["timing_ms"] = (time.perf_counter() - started) * 1000.0
        return response

    def _llandmark(self, query: str, k: int, weights: ModalityWeights | None, scope) -> dict:
        plan = build_plan(
            query,
            self.kb,
            llm=self.plan_llm,
            weights=weights or self.config.weights,
            top_k=self.config.top_k_per_modality,
        )
        enhanced = enhance_plan(plan, self.kb)
        execution = execute_plan(
            enhanced,
            embedder=self.embedder,
            vectors=self.vectors,
            texts=self.texts if self.texts.frozen else None,
            objects=self.objects,
            scope_filter=scope,
        )
        fused = fuse(execution.results, enhanced.weights, catalog=self.catalog)
        top = fused[:k]
        packages = group_by_video(top, texts=self.texts if self.texts.frozen else None, objects=self.objects)
        warnings = list(execution.warnings)
        answer_payload = None
        if packages and self.llm is not None:
            try:
                answer = synthesize_answer(packages, query, self.llm)
                answer_payload = {
                    "text": answer.answer,
                    "cited_frames": [key.text for key in answer.cited_frames],
                    "warnings": answer.warnings,
                }
            except SynthesisError as exc:
                warnings.append(str(exc))

        per_modality_rows: dict[str, list] = {}
        for modality, results in execution.results.items():
            if modality == "semantic":
                per_modality_rows[modality] = [self._frame_row(h.key, h.score) for h in results]
            elif modality in ("asr", "ocr"):
                per_modality_rows[modality] = [self._text_row(h) for h in results]
            else:
                per_modality_rows[modality] = [
                    dict(self._frame_row(key, float(count)), matched_count=count) for key, count in results
                ]

        return {
            "plan": plan.as_dict(),
            "refined_query": enhanced.semantic_query,
            "enhanced_plan": enhanced.as_dict(),
            "per_modality": per_modality_rows,
            "results": [self._scored_frame_row(f) for f in top],
            "videos": [
                {
                    "group_id": p.group_id,
                    "video_id": p.video_id,
                    "best_fused": p.best_fused,
                    "frames": [self._scored_frame_row(f) for f in p.frames],
                    "asr_snippets": [self._text_row(h) for h in p.asr_snippets],
                    "ocr_texts": [self._text_row(h) for h in p.ocr_texts],
                    "objects": [{"key": key.text, "labels": labels} for key, labels in p.objects],
                }
                for p in packages
            ],
            "answer": answer_payload,
            "warnings": warnings,
        }

    def temporal(self, queries: list[str], k: int | None = None, k_per_step: int | None = None) -> dict:
        started = time.perf_counter()
        self._require("temporal")
        if not queries or any(not q.strip() for q in queries):
            raise ValueError("temporal mode needs a non-empty ordered list of queries")
        k = k or self.config.default_k
        depth = k_per_step or self.config.temporal_depth
        videos = temporal_search(queries, embedder=self.embedder, vectors=self.vectors, k_per_step=depth)
        return {
            "mode": "temporal",
            "queries": list(queries),
            "k_per_step": depth,
            "results": [
                {"group_id": v.group_id, "video_id": v.video_id, "video_name": f"{v.group_id}_{v.video_id}", "score": v.score}
                for v in videos[:k]
            ],
            "capabilities": self.capabilities(),
            "timing_ms": (time.perf_counter() - started) * 1000.0,
        }

    def i2i(self, query: str, params: I2IParams | None = None, k: int | None = None) -> dict:
        started = time.perf_counter()
        self._require("i2i")
        params = params or I2IParams(
            per_reference_top_k=self.config.i2i_per_reference_top_k,
            max_landmarks=self.config.i2i_max_landmarks,
            images_per_landmark=self.config.i2i_images_per_landmark,
        )
        result: I2IResult = i2i_search(
            query,
            params,
            kb=self.kb,
            llm=self.llm,
            image_search=self.image_search,
            embedder=self.embedder,
            index=self.vectors,
        )
        k = k or self.config.default_k
        return {
            "mode": "i2i",
            "query": query,
            "params": {
                "per_reference_top_k": params.per_reference_top_k,
                "max_landmarks": params.max_landmarks,
                "images_per_landmark": params.images_per_landmark,
            },
            "image_queries": [{"landmark": name, "queries": queries} for name, queries in result.image_queries],
            "references": result.references,
            "results": [self._frame_row(h.key, h.score) for h in result.hits[:k]],
            "warnings": result.warnings,
            "capabilities": self.capabilities(),
            "timing_ms": (time.perf_counter() - started) * 1000.0,
        }

    def frame_info(self, group_id: str, video_id: str, frame_id: int) -> dict:
        key = FrameKey(group_id, video_id, frame_id)
        meta = self.catalog.meta_for(key.video)
        if meta is None:
            raise KeyError(f"unknown video {group_id}/{video_id}")
        if frame_id >= meta.frame_count:
            raise ValueError(f"frame {frame_id} out of range (frame_count {meta.frame_count})")
        info = {
            "key": key.text,
            "group_id": group_id,
            "video_id": video_id,
            "frame_id": frame_id,
            "seconds": frame_id / meta.fps,
            "fps": meta.fps,
            "frame_count": meta.frame_count,
            "is_keyframe": frame_id in self.catalog.keyframes_for(key.video),
        }
        if self.config.thumbnails_dir:
            info["thumbnail"] = f"/thumbnails/{group_id}/{video_id}/{frame_id}.jpg"
        return info


def build_engine(config: EngineConfig, count_objects: bool = False) -> Engine:
    engine = Engine(config)
    engine.ingest(count_objects=count_objects)
    return engine
