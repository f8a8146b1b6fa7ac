"""HTTP surface over the engine.

Endpoints mirror the engine's dispatch one-to-one. Indices are immutable
after ingest; /api/ingest swaps a freshly built engine in atomically and is
rejected unless the server was started in reingest-allowed mode.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import EngineConfig, load_config
from .engine import MODES, Engine, build_engine
from .errors import CapabilityError, FrameseekError
from .landmark import I2IParams
from .planner import ModalityWeights


class EngineHolder:
    """Atomic reference to the currently serving engine."""

    def __init__(self, engine: Engine):
        self._engine = engine
        self._lock = threading.Lock()

    @property
    def engine(self) -> Engine:
        return self._engine

    def swap(self, engine: Engine) -> None:
        with self._lock:
            self._engine = engine


class WeightsBody(BaseModel):
    semantic: float = Field(0.5, ge=0)
    asr: float = Field(0.2, ge=0)
    ocr: float = Field(0.2, ge=0)
    object: float = Field(0.1, ge=0)


class SearchBody(BaseModel):
    mode: str
    query: str = ""
    k: int | None = Field(None, ge=1)
    weights: WeightsBody | None = None
    include: list[str] | None = None
    exclude: list[str] | None = None
    translate: bool = False
    object_mode: str = "OR"
    min_score: float = Field(0.0, ge=0.0, le=1.0)
    queries: list[str] | None = None


class TemporalBody(BaseModel):
    queries: list[str]
    k: int | None = Field(None, ge=1)
    k_per_step: int | None = Field(None, ge=1)


class I2IBody(BaseModel):
    query: str
    k: int | None = Field(None, ge=1)
    per_reference_top_k: int = Field(50, ge=1)
    max_landmarks: int = Field(2, ge=1)
    images_per_landmark: int = Field(3, ge=1)


class IngestBody(BaseModel):
    config_path: str | None = None


class EvalBody(BaseModel):
    submission_path: str
    ground_truth_path: str
    ks: list[int] | None = None
    strict_answers: bool = False


def create_app(holder: EngineHolder, allow_reingest: bool = False) -> FastAPI:
    app = FastAPI(title="frameseek", version="0.1.0")

    @app.exception_handler(CapabilityError)
    async def capability_error(_: Request, exc: CapabilityError):
        return JSONResponse(status_code=400, content={"error": str(exc), "capabilities": exc.capabilities})

    @app.exception_handler(FrameseekError)
    async def engine_error(_: Request, exc: FrameseekError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(ValueError)
    async def value_error(_: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(OSError)
    async def os_error(_: Request, exc: OSError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(KeyError)
    async def key_error(_: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={"error": str(exc.args[0] if exc.args else exc)})

    @app.post("/api/search")
    def search(body: SearchBody):
        engine = holder.engine
        if body.mode not in MODES:
            return JSONResponse(
                status_code=400,
                content={"error": f"unknown mode {body.mode!r}", "allowed_modes": list(MODES)},
            )
        if body.mode == "temporal":
            return engine.temporal(body.queries or ([body.query] if body.query else []), k=body.k)
        if body.mode == "i2i":
            return engine.i2i(body.query, k=body.k)
        weights = None
        if body.weights is not None:
            weights = ModalityWeights(**body.weights.model_dump())
        return engine.search(
            body.mode,
            body.query,
            k=body.k,
            weights=weights,
            include=body.include,
            exclude=body.exclude,
            translate=body.translate,
            object_mode=body.object_mode,
            min_score=body.min_score,
        )

    @app.post("/api/temporal")
    def temporal(body: TemporalBody):
        return holder.engine.temporal(body.queries, k=body.k, k_per_step=body.k_per_step)

    @app.post("/api/i2i")
    def i2i(body: I2IBody):
        params = I2IParams(
            per_reference_top_k=body.per_reference_top_k,
            max_landmarks=body.max_landmarks,
            images_per_landmark=body.images_per_landmark,
        )
        return holder.engine.i2i(body.query, params=params, k=body.k)

    @app.post("/api/ingest")
    def ingest(body: IngestBody):
        if not allow_reingest:
            return JSONResponse(
                status_code=409,
                content={"error": "server not started in reingest-allowed mode"},
            )
        config = load_config(body.config_path) if body.config_path else holder.engine.config
        engine = build_engine(config, count_objects=True)
        holder.swap(engine)
        return engine.report.as_dict()

    @app.post("/api/eval")
    def evaluate_files(body: EvalBody):
        from .evaluation import KSet, evaluate, parse_ground_truth, parse_submission

        ks = KSet(tuple(body.ks)) if body.ks else KSet()
        report = evaluate(
            parse_submission(body.submission_path),
            parse_ground_truth(body.ground_truth_path),
            ks=ks,
            strict_answers=body.strict_answers,
        )
        return {
            "per_query": [{"query_id": q, "score": s} for q, s in report.per_query],
            "mean_score": report.mean_score,
            "ks": list(report.ks),
            "missing_queries": report.missing_queries,
        }

    @app.get("/api/capabilities")
    def capabilities():
        engine = holder.engine
        return {
            "modes": engine.capabilities(),
            "counts": engine.report.counts,
            "warnings": engine.report.warnings,
        }

    @app.get("/api/frame/{group_id}/{video_id}/{frame_id}")
    def frame(group_id: str, video_id: str, frame_id: int):
        return holder.engine.frame_info(group_id, video_id, frame_id)

    config = holder.engine.config
    if config.thumbnails_dir and Path(config.thumbnails_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/thumbnails", StaticFiles(directory=config.thumbnails_dir), name="thumbnails")
    if config.ui_dir and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")
    return app


def serve(config: EngineConfig, host: str = "127.0.0.1", port: int = 8000, allow_reingest: bool = False) -> None:
    import uvicorn

    holder = EngineHolder(build_engine(config))
    app = create_app(holder, allow_reingest=allow_reingest)
    uvicorn.run(app, host=host, port=port)
