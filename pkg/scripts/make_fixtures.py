#!/usr/bin/env python3
"""Regenerate the demo fixture corpus under data/.

The corpus is small but engineered so the retrieval behaviors are visible:
the landmark's visual description embeds next to one target keyframe while
the bare landmark name embeds next to a different frame, two frames carry
the temporal demo events, and one frame sits where the i2i reference image
embeds. Everything is derived from the deterministic mock embedder, so the
output files are stable across runs.

Run from the repo root:  python scripts/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from frameseek.catalog import Catalog, FrameKey, Shot
from frameseek.clients import MockEmbeddingClient
from frameseek.landmark import default_kb, enhance_plan
from frameseek.planner import build_plan

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
FIXTURES = DATA / "fixtures"

DIMENSION = 32
GROUPS = ("L01", "L02")
VIDEOS = ("V001", "V002", "V003", "V004")
SHOTS_PER_VIDEO = 5
SHOT_LENGTH = 250
FPS = {"L01": 25.0, "L02": 30.0}
FRAME_COUNT = 3000

LANDMARK_QUERY = "The clip shows Ben Thanh Market"
TEMPORAL_STEP_1 = "a man speaking at a podium"
TEMPORAL_STEP_2 = "crowd waving flags"
I2I_REFERENCES = ["img/ben_thanh_1.jpg", "img/ben_thanh_2.jpg"]


def build_catalog() -> Catalog:
    catalog = Catalog()
    for group in GROUPS:
        for video in VIDEOS:
            for s in range(SHOTS_PER_VIDEO):
                start = s * SHOT_LENGTH
                catalog.add_shot(Shot(group, video, start, start + SHOT_LENGTH - 1))
    return catalog


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    embedder = MockEmbeddingClient(dimension=DIMENSION)
    kb = default_kb()
    catalog = build_catalog()

    enhanced_query = enhance_plan(build_plan(LANDMARK_QUERY, kb), kb).semantic_query

    v001_keyframes = catalog.keyframes_for(("L01", "V001"))
    target = FrameKey("L01", "V001", v001_keyframes[0])      # landmark-effect target
    i2i_target = FrameKey("L01", "V001", v001_keyframes[2])  # i2i target
    name_magnet = FrameKey("L02", "V004", catalog.keyframes_for(("L02", "V004"))[0])
    podium = FrameKey("L02", "V001", catalog.keyframes_for(("L02", "V001"))[0])
    flags = FrameKey("L02", "V001", catalog.keyframes_for(("L02", "V001"))[5])

    engineered = {
        target.text: embedder.embed_text(enhanced_query),
        name_magnet.text: embedder.embed_text(LANDMARK_QUERY),
        i2i_target.text: embedder.embed_image(I2I_REFERENCES[0]),
        podium.text: embedder.embed_text(TEMPORAL_STEP_1),
        flags.text: embedder.embed_text(TEMPORAL_STEP_2),
    }

    with open(FIXTURES / "shots.jsonl", "w", encoding="utf-8") as handle:
        for group in GROUPS:
            for video in VIDEOS:
                for shot in catalog.shots_for((group, video)):
                    handle.write(
                        json.dumps(
                            {
                                "group_id": group,
                                "video_id": video,
                                "start_frame": shot.start_frame,
                                "end_frame": shot.end_frame,
                            }
                        )
                        + "\n"
                    )

    with open(FIXTURES / "videos.jsonl", "w", encoding="utf-8") as handle:
        for group in GROUPS:
            for video in VIDEOS:
                handle.write(
                    json.dumps(
                        {"group_id": group, "video_id": video, "fps": FPS[group], "frame_count": FRAME_COUNT}
                    )
                    + "\n"
                )

    with open(FIXTURES / "embeddings.jsonl", "w", encoding="utf-8") as handle:
        for key in catalog.iter_keys():
            vector = engineered.get(key.text)
            if vector is None:
                vector = embedder.embed_text(f"frame {key.text}")
            handle.write(json.dumps({"key": key.text, "vector": [round(float(x), 8) for x in vector]}) + "\n")

    asr_rows = [
        {"group_id": target.group_id, "video_id": target.video_id,
         "start_frame": target.frame_id - 5, "end_frame": target.frame_id + 5,
         "text": "toàn cảnh chợ Bến Thành về đêm"},
        {"group_id": "L01", "video_id": "V002", "start_frame": 0, "end_frame": 400,
         "text": "bản tin thời sự buổi tối hôm nay"},
        {"group_id": "L01", "video_id": "V003", "start_frame": 500, "end_frame": 900,
         "text": "phóng sự về giao thông đô thị"},
        {"group_id": "L02", "video_id": "V001", "start_frame": 0, "end_frame": 300,
         "text": "một người đàn ông phát biểu trước đám đông"},
        {"group_id": "L02", "video_id": "V002", "start_frame": 100, "end_frame": 600,
         "text": "lễ hội âm nhạc ngoài trời cuối tuần"},
        {"group_id": "L02", "video_id": "V003", "start_frame": 0, "end_frame": 2999,
         "text": "tài liệu về lịch sử kiến trúc Pháp"},
    ]
    with open(FIXTURES / "asr.jsonl", "w", encoding="utf-8") as handle:
        for row in asr_rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")

    ocr_rows = [
        {"group_id": target.group_id, "video_id": target.video_id, "frame_id": target.frame_id,
         "text_raw": "CHO BEN THANH", "confidence": 0.93},
        {"group_id": "L01", "video_id": "V003", "frame_id": 37,
         "text_raw": "THOI SU 19H", "text_refined": "Thời sự 19h", "confidence": 0.88},
        {"group_id": "L01", "video_id": "V002", "frame_id": 124,
         "text_raw": "GIAM GIA 50%", "confidence": 0.7},
        {"group_id": "L02", "video_id": "V002", "frame_id": 287,
         "text_raw": "LE HOI AM NHAC", "confidence": 0.81},
        {"group_id": "L02", "video_id": "V003", "frame_id": 462,
         "text_raw": "KIEN TRUC PHAP", "text_refined": "Kiến trúc Pháp", "confidence": 0.9},
    ]
    with open(FIXTURES / "ocr.jsonl", "w", encoding="utf-8") as handle:
        for row in ocr_rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")

    bbox = [0.2, 0.2, 0.4, 0.5]
    detections = {
        "L01/V002/37": [{"label": "person", "score": 0.95, "bbox": bbox},
                        {"label": "person", "score": 0.88, "bbox": bbox},
                        {"label": "car", "score": 0.76, "bbox": bbox}],
        "L01/V002/124": [{"label": "person", "score": 0.91, "bbox": bbox}],
        "L01/V003/212": [{"label": "car", "score": 0.83, "bbox": bbox},
                         {"label": "motorcycle", "score": 0.79, "bbox": bbox}],
        "L02/V001/37": [{"label": "person", "score": 0.97, "bbox": bbox}],
        "L02/V002/287": [{"label": "person", "score": 0.66, "bbox": bbox},
                         {"label": "dog", "score": 0.58, "bbox": bbox}],
    }
    (FIXTURES / "objects.json").write_text(json.dumps(detections, indent=1), encoding="utf-8")

    submission = [
        "q1, L01_V001, " + str(target.frame_id),
        "q1, L02_V004, 37",
        "q2, L01_V002, 10;260;510",
    ]
    (FIXTURES / "submission.csv").write_text("\n".join(submission) + "\n", encoding="utf-8")
    ground_truth = [
        {"query_id": "q1", "task": "KIS", "video_name": "L01_V001",
         "frame_range": [target.frame_id - 10, target.frame_id + 10]},
        {"query_id": "q2", "task": "TRAKE", "video_name": "L01_V002",
         "segments": [[0, 20], [250, 270], [500, 520]], "tolerance": 0},
    ]
    with open(FIXTURES / "ground_truth.jsonl", "w", encoding="utf-8") as handle:
        for row in ground_truth:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")

    config = {
        "shots_path": "fixtures/shots.jsonl",
        "videos_path": "fixtures/videos.jsonl",
        "embeddings_path": "fixtures/embeddings.jsonl",
        "asr_path": "fixtures/asr.jsonl",
        "ocr_path": "fixtures/ocr.jsonl",
        "objects_path": "fixtures/objects.json",
        "embedding_dimension": DIMENSION,
        "mock_mode": True,
        "image_fixtures": {
            "Ben Thanh Market": I2I_REFERENCES,
            "Ben Thanh Market Ho Chi Minh City": [I2I_REFERENCES[0]],
        },
    }
    (DATA / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")

    print(f"wrote fixtures for {len(GROUPS) * len(VIDEOS)} videos under {FIXTURES}")
    print(f"landmark target: {target.text}; name magnet: {name_magnet.text}; i2i target: {i2i_target.text}")


if __name__ == "__main__":
    main()
