"""Engine configuration: file values overridden by environment, then by flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .planner import DEFAULT_TOP_K, ModalityWeights

ENV_CONFIG = "ENGINE_CONFIG"
ENV_MOCK = "MOCK_MODE"
ENV_LLM_ENDPOINT = "LLM_ENDPOINT"
ENV_LLM_KEY = "LLM_API_KEY"
ENV_IMG_ENDPOINT = "IMG_SEARCH_ENDPOINT"
ENV_IMG_KEY = "IMG_SEARCH_KEY"
ENV_IMG_ENGINE = "IMG_SEARCH_ENGINE_ID"
ENV_EMBED_ENDPOINT = "EMBED_ENDPOINT"
ENV_EMBED_KEY = "EMBED_API_KEY"


@dataclass(frozen=True)
class EngineConfig:
    shots_path: str | None = None
    videos_path: str | None = None
    embeddings_path: str | None = None
    asr_path: str | None = None
    ocr_path: str | None = None
    objects_path: str | None = None
    landmarks_path: str | None = None

    weights: ModalityWeights = ModalityWeights()
    top_k_per_modality: int = DEFAULT_TOP_K
    default_k: int = 20
    temporal_depth: int = 200
    i2i_per_reference_top_k: int = 50
    i2i_max_landmarks: int = 2
    i2i_images_per_landmark: int = 3
    embedding_dimension: int = 32
    fps_fallback: float = 25.0
    refine_ocr: bool = True

    include_groups: tuple[str, ...] = ()
    exclude_groups: tuple[str, ...] = ()
    include_videos: tuple[str, ...] = ()
    exclude_videos: tuple[str, ...] = ()

    mock_mode: bool = True
    mock_seed: str = ""
    llm_endpoint: str | None = None
    llm_api_key: str = ""
    img_search_endpoint: str | None = None
    img_search_key: str = ""
    img_search_engine_id: str = ""
    embed_endpoint: str | None = None
    embed_api_key: str = ""
    image_fixtures: dict[str, list[str]] = field(default_factory=dict)

    thumbnails_dir: str | None = None
    ui_dir: str | None = None

    def video_filter(self):
        """Predicate over (group_id, video_id) from the include/exclude lists."""
        include_groups = set(self.include_groups)
        exclude_groups = set(self.exclude_groups)
        include_videos = set(self.include_videos)
        exclude_videos = set(self.exclude_videos)
        if not (include_groups or exclude_groups or include_videos or exclude_videos):
            return None

        def accept(group_id: str, video_id: str) -> bool:
            name = f"{group_id}/{video_id}"
            if group_id in exclude_groups or name in exclude_videos:
                return False
            if include_groups and group_id not in include_groups:
                return False
            if include_videos and name not in include_videos:
                return False
            return True

        return accept


_PATH_FIELDS = (
    "shots_path",
    "videos_path",
    "embeddings_path",
    "asr_path",
    "ocr_path",
    "objects_path",
    "landmarks_path",
    "thumbnails_dir",
    "ui_dir",
)


def _from_dict(payload: dict, base_dir: Path | None = None) -> EngineConfig:
    kwargs = {}
    for name in payload:
        if name == "weights":
            kwargs["weights"] = ModalityWeights(**payload["weights"])
        elif name in ("include_groups", "exclude_groups", "include_videos", "exclude_videos"):
            kwargs[name] = tuple(payload[name])
        elif name == "image_fixtures":
            kwargs[name] = {k: list(v) for k, v in payload[name].items()}
        else:
            kwargs[name] = payload[name]
    config = EngineConfig(**kwargs)
    if base_dir is not None:
        resolved = {}
        for name in _PATH_FIELDS:
            value = getattr(config, name)
            if value and not Path(value).is_absolute():
                resolved[name] = str((base_dir / value).resolve())
        if resolved:
            config = replace(config, **resolved)
    return config


def _truthy(value: str) -> bool:
    return value.strip().lower() in ("1", "true", "yes", "on")


def load_config(path: str | Path | None = None, env: dict | None = None, **overrides) -> EngineConfig:
    """Resolve configuration with precedence: file < environment < overrides."""
    env = os.environ if env is None else env
    if path is None:
        path = env.get(ENV_CONFIG)
    if path:
        path = Path(path)
        payload = json.loads(path.read_text(encoding="utf-8"))
        config = _from_dict(payload, base_dir=path.parent)
    else:
        config = EngineConfig()

    env_updates = {}
    if ENV_MOCK in env:
        env_updates["mock_mode"] = _truthy(env[ENV_MOCK])
    if env.get(ENV_LLM_ENDPOINT):
        env_updates["llm_endpoint"] = env[ENV_LLM_ENDPOINT]
    if env.get(ENV_LLM_KEY):
        env_updates["llm_api_key"] = env[ENV_LLM_KEY]
    if env.get(ENV_IMG_ENDPOINT):
        env_updates["img_search_endpoint"] = env[ENV_IMG_ENDPOINT]
    if env.get(ENV_IMG_KEY):
        env_updates["img_search_key"] = env[ENV_IMG_KEY]
    if env.get(ENV_IMG_ENGINE):
        env_updates["img_search_engine_id"] = env[ENV_IMG_ENGINE]
    if env.get(ENV_EMBED_ENDPOINT):
        env_updates["embed_endpoint"] = env[ENV_EMBED_ENDPOINT]
    if env.get(ENV_EMBED_KEY):
        env_updates["embed_api_key"] = env[ENV_EMBED_KEY]
    if env_updates:
        config = replace(config, **env_updates)

    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        config = replace(config, **overrides)
    return config
