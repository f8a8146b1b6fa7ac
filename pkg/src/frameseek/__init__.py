"""frameseek: landmark-aware multimodal video retrieval engine."""

from .catalog import (
    Catalog,
    FrameKey,
    KeyframePolicy,
    Shot,
    VideoMeta,
    index_to_time,
    parse_frame_key,
    render_frame_key,
    select_keyframes,
)
from .config import EngineConfig, load_config
from .engine import Engine, build_engine
from .evaluation import GroundTruthItem, KSet, Prediction, final_score, r_score
from .landmark import I2IParams, LandmarkEntry, LandmarkKB, default_kb, detect_landmarks, enhance_plan, i2i_search
from .object_index import Detection, ObjectQuery, ObjectStore
from .ocr import OcrEntry, refine_batch, strip_diacritics
from .orchestrator import ScoredFrame, ScoredVideo, execute_plan, fuse, group_by_video, synthesize_answer, temporal_search
from .planner import ModalityWeights, SearchPlan, build_plan
from .text_index import TextDoc, TextHit, TextIndex
from .vector_index import VectorHit, VectorIndex

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "Detection",
    "Engine",
    "EngineConfig",
    "FrameKey",
    "GroundTruthItem",
    "I2IParams",
    "KSet",
    "KeyframePolicy",
    "LandmarkEntry",
    "LandmarkKB",
    "ModalityWeights",
    "ObjectQuery",
    "ObjectStore",
    "OcrEntry",
    "Prediction",
    "ScoredFrame",
    "ScoredVideo",
    "SearchPlan",
    "Shot",
    "TextDoc",
    "TextHit",
    "TextIndex",
    "VectorHit",
    "VectorIndex",
    "VideoMeta",
    "build_engine",
    "build_plan",
    "default_kb",
    "detect_landmarks",
    "enhance_plan",
    "execute_plan",
    "final_score",
    "fuse",
    "group_by_video",
    "i2i_search",
    "index_to_time",
    "load_config",
    "parse_frame_key",
    "r_score",
    "refine_batch",
    "render_frame_key",
    "select_keyframes",
    "strip_diacritics",
    "synthesize_answer",
    "temporal_search",
]
