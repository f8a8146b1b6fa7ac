"""Engine assembly over the fixture corpus: ingest, dispatch, determinism."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import pytest

from frameseek.catalog import KeyframePolicy, Shot, select_keyframes
from frameseek.config import load_config
from frameseek.engine import build_engine
from frameseek.errors import CapabilityError, PipelineError

DATA = Path(__file__).resolve().parent.parent / "data"

LANDMARK_QUERY = "The clip shows Ben Thanh Market"
TARGET = "L01/V001/37"
NAME_MAGNET = "L02/V004/37"
I2I_TARGET = "L01/V001/212"


@pytest.fixture(scope="module")
def engine():
    return build_engine(load_config(DATA / "config.json"), count_objects=True)


def recount_fixture_keyframes() -> tuple[int, int]:
    """Independent recount of shots and keyframes straight from the files."""
    shots = 0
    keyframes = set()
    with open(DATA / "fixtures" / "shots.jsonl", encoding="utf-8") as handle:
        for line in handle:
            record = json.loads(line)
            shots += 1
            for frame in select_keyframes(
                Shot(record["group_id"], record["video_id"], record["start_frame"], record["end_frame"]),
                KeyframePolicy(),
            ):
                keyframes.add((record["group_id"], record["video_id"], frame))
    return shots, len(keyframes)


class TestIngest:
    def test_build_report_counts_match_recount(self, engine):
        shots, keyframes = recount_fixture_keyframes()
        assert shots == 40
        assert keyframes <= 120
        counts = engine.report.counts
        assert counts["shots"] == shots
        assert counts["keyframes"] == keyframes
        assert counts["embeddings"] == keyframes
        assert counts["asr_docs"] == 6
        assert counts["ocr_docs"] == 5
        assert counts["detections"] == sum(
            len(v) for v in json.loads((DATA / "fixtures" / "objects.json").read_text()).values()
        )

    def test_exclude_group_leaves_no_keys(self):
        config = load_config(DATA / "config.json", exclude_groups=("L01",))
        engine = build_engine(config, count_objects=True)
        assert all(key.group_id != "L01" for key, _ in engine.vectors.items())
        for doc in engine.texts.docs_for_video("L01", "V001"):
            raise AssertionError(f"unexpected L01 doc {doc}")
        hits = engine.search("semantic", "anything", k=100)["results"]
        assert all(not row["key"].startswith("L01/") for row in hits)
        assert all(key.group_id != "L01" for key in engine.objects._load())

    def test_binary_embeddings_with_filter(self, tmp_path, engine):
        binary = tmp_path / "embeddings.bin"
        engine.vectors.save(binary)
        payload = json.loads((DATA / "config.json").read_text())
        for field in ("shots_path", "videos_path", "asr_path", "ocr_path", "objects_path"):
            payload[field] = str(DATA / payload[field])
        payload["embeddings_path"] = str(binary)
        payload["exclude_groups"] = ["L02"]
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload))
        rebuilt = build_engine(load_config(path))
        assert len(rebuilt.vectors) == 60
        assert all(key.group_id == "L01" for key, _ in rebuilt.vectors.items())
        top = rebuilt.search("llandmark", LANDMARK_QUERY, k=1)["results"][0]
        assert top["key"] == TARGET

    def test_missing_objects_degrades_capability(self, tmp_path):
        payload = json.loads((DATA / "config.json").read_text())
        payload["objects_path"] = "does_not_exist.json"
        for field in ("shots_path", "videos_path", "embeddings_path", "asr_path", "ocr_path"):
            payload[field] = str(DATA / payload[field])
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload))
        engine = build_engine(load_config(path))
        caps = engine.capabilities()
        assert not caps["object"]
        assert caps["semantic"] and caps["asr"] and caps["ocr"]
        assert any("object" in w for w in engine.report.warnings)
        with pytest.raises(CapabilityError):
            engine.search("object", "person", k=5)


class TestSearchModes:
    def test_semantic_plain_query_hits_name_magnet(self, engine):
        response = engine.search("semantic", LANDMARK_QUERY, k=5)
        assert response["results"][0]["key"] == NAME_MAGNET
        assert response["results"][0]["score"] == pytest.approx(1.0, abs=1e-6)
        assert len(response["results"]) == 5

    def test_llandmark_ranks_target_top1(self, engine):
        response = engine.search("llandmark", LANDMARK_QUERY, k=10)
        assert response["results"][0]["key"] == TARGET
        assert response["results"][0]["fused"] == 1.0
        assert response["refined_query"].startswith("The clip shows Large yellow-ochre market hall")
        assert response["plan"]["detected_landmarks"] == ["Ben Thanh Market"]
        assert set(response["plan"]["weights"]) == {"semantic", "asr", "ocr", "object"}
        assert response["answer"]["cited_frames"] == [TARGET]

    def test_llandmark_differs_from_semantic(self, engine):
        semantic_top = engine.search("semantic", LANDMARK_QUERY, k=1)["results"][0]["key"]
        llandmark_top = engine.search("llandmark", LANDMARK_QUERY, k=1)["results"][0]["key"]
        assert semantic_top != TARGET
        assert llandmark_top == TARGET

    def test_ocr_mode(self, engine):
        response = engine.search("ocr", "ben thanh", k=5)
        assert response["results"][0]["group_id"] == "L01"
        assert response["results"][0]["start_frame"] == 37
        assert response["results"][0]["highlights"]

    def test_asr_mode_accented_query(self, engine):
        response = engine.search("asr", "chợ Bến Thành", k=5)
        assert response["results"][0]["video_id"] == "V001"

    def test_object_mode(self, engine):
        response = engine.search("object", "person car", object_mode="AND", k=5)
        assert response["results"][0]["key"] == "L01/V002/37"
        assert response["results"][0]["matched_count"] == 3

    def test_object_mode_comma_separated_multiword_labels(self, engine):
        response = engine.search("object", "motorcycle, traffic light", object_mode="OR", k=5)
        assert response["results"][0]["key"] == "L01/V003/212"
        assert response["results"][0]["matched_count"] == 1

    def test_unknown_mode(self, engine):
        with pytest.raises(ValueError, match="unknown mode"):
            engine.search("psychic", "query", k=5)

    def test_include_exclude_scope(self, engine):
        response = engine.search("semantic", LANDMARK_QUERY, k=50, exclude=["L02"])
        assert all(row["group_id"] == "L01" for row in response["results"])
        response = engine.search("semantic", LANDMARK_QUERY, k=50, include=["L02/V004"])
        assert {row["video_id"] for row in response["results"]} == {"V004"}

    def test_temporal_two_steps(self, engine):
        response = engine.temporal(["a man speaking at a podium", "crowd waving flags"], k=5)
        assert response["results"][0]["group_id"] == "L02"
        assert response["results"][0]["video_id"] == "V001"
        assert response["results"][0]["score"] == pytest.approx(1.0, abs=1e-6)

    def test_i2i_finds_reference_aligned_frame(self, engine):
        response = engine.i2i(LANDMARK_QUERY, k=5)
        assert response["results"][0]["key"] == I2I_TARGET
        assert response["image_queries"][0]["landmark"] == "Ben Thanh Market"
        assert response["references"][0] == "img/ben_thanh_1.jpg"

    def test_i2i_without_landmark_raises(self, engine):
        with pytest.raises(PipelineError):
            engine.i2i("an empty beach at dawn")

    def test_frame_info(self, engine):
        info = engine.frame_info("L01", "V001", 37)
        assert info["seconds"] == pytest.approx(37 / 25.0)
        assert info["is_keyframe"]
        with pytest.raises(KeyError):
            engine.frame_info("L99", "V001", 0)
        with pytest.raises(ValueError):
            engine.frame_info("L01", "V001", 99999)


class TestDeterminism:
    def test_llandmark_byte_identical(self, engine):
        a = engine.search("llandmark", LANDMARK_QUERY, k=10)
        b = engine.search("llandmark", LANDMARK_QUERY, k=10)
        a.pop("timing_ms")
        b.pop("timing_ms")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_fused_scores_within_unit_interval(self, engine):
        response = engine.search("llandmark", LANDMARK_QUERY, k=50)
        for row in response["results"]:
            assert 0.0 <= row["fused"] <= 1.0
            for value in row["per_modality"].values():
                assert 0.0 <= value <= 1.0

    def test_fusion_weighted_average_invariant(self, engine):
        response = engine.search("llandmark", LANDMARK_QUERY, k=50)
        weights = response["enhanced_plan"]["weights"]
        for row in response["results"]:
            num = Fraction(0)
            den = Fraction(0)
            for modality, score in row["per_modality"].items():
                if weights[modality] > 0:
                    num += Fraction(weights[modality]) * Fraction(score)
                    den += Fraction(weights[modality])
            assert row["fused"] == float(num / den)
