"""Acceptance gate: every primary criterion at its stated tolerance.

Runs fully offline (mock clients, socket guard); each criterion prints one
PASS line when it holds, and pytest reports the failure otherwise.
"""

from __future__ import annotations

import json
import os
import random
import socket
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

os.environ["MOCK_MODE"] = "1"

from frameseek.catalog import FrameKey, KeyframePolicy, Shot, select_keyframes
from frameseek.clients import FixtureImageSearchClient, MockEmbeddingClient, MockLlmClient
from frameseek.config import load_config
from frameseek.engine import build_engine
from frameseek.evaluation import GroundTruthItem, KSet, Prediction, final_score, r_score
from frameseek.landmark import I2IParams, LandmarkEntry, LandmarkKB, i2i_search
from frameseek.ocr import strip_diacritics
from frameseek.orchestrator import fuse, temporal_search
from frameseek.planner import ModalityWeights
from frameseek.text_index import CHANNEL_OCR, TextDoc, TextHit, TextIndex
from frameseek.vector_index import VectorHit, VectorIndex

DATA = Path(__file__).resolve().parent.parent / "data"


def report(name: str) -> None:
    print(f"[ACCEPTANCE] {name}: PASS")


@pytest.fixture(autouse=True, scope="module")
def no_network():
    """The whole suite must pass without touching the network."""

    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted during acceptance run")

    original_connect = socket.socket.connect
    original_create = socket.create_connection
    socket.socket.connect = refuse
    socket.create_connection = refuse
    try:
        yield
    finally:
        socket.socket.connect = original_connect
        socket.create_connection = original_create


@pytest.fixture(scope="module")
def engine():
    return build_engine(load_config(DATA / "config.json"))


def test_keyframe_selection_against_exact_rational_oracle():
    def oracle(start: int, end: int, percentiles) -> list[int]:
        count = end - start + 1
        if count <= len(percentiles):
            return list(range(start, end + 1))
        chosen = set()
        for p in percentiles:
            target = Fraction(start) + Fraction(p) * (end - start)
            # The nearest integer lies within 1 of floor(target); enumerate
            # that window (clipped to the shot) by exact rational distance,
            # ties to the lower frame.
            anchor = target.numerator // target.denominator
            candidates = [f for f in range(anchor - 1, anchor + 2) if start <= f <= end]
            best, best_distance = None, None
            for frame in candidates:
                distance = abs(Fraction(frame) - target)
                if best_distance is None or distance < best_distance:
                    best, best_distance = frame, distance
            chosen.add(best)
        return sorted(chosen)

    policy = KeyframePolicy()
    assert select_keyframes(Shot("g", "v", 0, 100), policy) == [15, 50, 85]

    rng = random.Random(424242)
    shots = []
    for _ in range(1000):
        start = rng.randrange(0, 50_000)
        shots.append(Shot("g", "v", start, start + rng.randrange(0, 500)))

    started = time.perf_counter()
    selected = [select_keyframes(shot, policy) for shot in shots]
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"selecting keyframes for 1000 shots took {elapsed:.2f}s"

    for shot, frames in zip(shots, selected):
        assert frames == oracle(shot.start_frame, shot.end_frame, policy.percentiles)
    report(f"keyframe selection (1000 shots vs rational oracle, {elapsed:.3f}s < 1s)")


def test_vector_search_exact_top10_vs_brute_force():
    started = time.perf_counter()
    dimension = 32
    rng = np.random.default_rng(20250808)
    index = VectorIndex(dimension)
    stored: dict[str, np.ndarray] = {}
    for i in range(1000):
        key = FrameKey("G", f"V{i // 50:03d}", i % 50)
        vector = rng.standard_normal(dimension)
        index.add_embedding(key, vector)
        stored[key.text] = vector / np.linalg.norm(vector)
    index.freeze()

    for _ in range(100):
        query = rng.standard_normal(dimension)
        qhat = query / np.linalg.norm(query)
        oracle = sorted(
            ((text, float(np.dot(vector, qhat))) for text, vector in stored.items()),
            key=lambda item: (-item[1], item[0]),
        )[:10]
        got = index.search(query, k=10)
        assert [h.key.text for h in got] == [text for text, _ in oracle]

    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"vector criterion took {elapsed:.2f}s"
    report(f"vector search (exact top-10, 1000x32d x 100 queries, {elapsed:.2f}s < 10s)")


def test_bm25_hand_computed_fixture_to_1e9():
    index = TextIndex()
    corpus = {"d1": "thap rua ho guom thap", "d2": "ben thanh cho dem", "d3": "ha noi pho co"}
    for doc_id, text in corpus.items():
        index.index_document(
            TextDoc(doc_id=doc_id, group_id="g", video_id="v", start_frame=0, end_frame=10,
                    channel="asr", text=text)
        )
    index.freeze()
    # Hand-computed Okapi values, k1=1.2 b=0.75: N=3, avgdl=13/3, idf=ln(2.5/1.5).
    hits = index.search_text("thap rua", k=10)
    assert [h.doc.doc_id for h in hits] == ["d1"]
    assert abs(hits[0].score - 1.1538334176399956) < 1e-9
    hits = index.search_text("ha noi thap", k=10)
    assert [h.doc.doc_id for h in hits] == ["d3", "d1"]
    assert abs(hits[0].score - 1.0548456923976417) < 1e-9
    assert abs(hits[1].score - 0.6732540479127805) < 1e-9
    report("BM25 (hand-computed Okapi fixture to 1e-9)")


def _vhit(text: str, score: float) -> VectorHit:
    from frameseek.catalog import parse_frame_key

    return VectorHit(parse_frame_key(text), score)


def _ocr_hit(text_key: str, score: float) -> TextHit:
    from frameseek.catalog import parse_frame_key

    key = parse_frame_key(text_key)
    doc = TextDoc(doc_id=f"ocr:{text_key}", group_id=key.group_id, video_id=key.video_id,
                  start_frame=key.frame_id, end_frame=key.frame_id, channel=CHANNEL_OCR, text="t")
    return TextHit(doc=doc, score=score)


def test_fusion_formula_exact_and_properties():
    # (0.8, w=1; 0.6, w=1) -> 0.7 exactly. Raw lists normalize to those values.
    results = {
        "semantic": [_vhit("g/v/1", 1.0), _vhit("g/v/7", 0.8), _vhit("g/v/2", 0.0)],
        "ocr": [_ocr_hit("g/v/8", 1.0), _ocr_hit("g/v/7", 0.6), _ocr_hit("g/v/9", 0.0)],
    }
    fused = {f.key.text: f.fused for f in fuse(results, ModalityWeights(1.0, 0.0, 1.0, 0.0))}
    assert fused["g/v/7"] == 0.7

    # (0.9, w=2; 0.3, w=1) -> 0.7 exactly.
    results = {
        "semantic": [_vhit("g/v/1", 1.0), _vhit("g/v/7", 0.9), _vhit("g/v/2", 0.0)],
        "ocr": [_ocr_hit("g/v/8", 1.0), _ocr_hit("g/v/7", 0.3), _ocr_hit("g/v/9", 0.0)],
    }
    fused = {f.key.text: f.fused for f in fuse(results, ModalityWeights(2.0, 0.0, 1.0, 0.0))}
    assert fused["g/v/7"] == 0.7

    rng = random.Random(20250808)

    def random_results():
        frames = [f"g/v/{i}" for i in range(rng.randrange(2, 8))]
        out: dict[str, list] = {}
        if rng.random() < 0.9:
            out["semantic"] = [_vhit(f, rng.random()) for f in rng.sample(frames, rng.randrange(1, len(frames) + 1))]
        if rng.random() < 0.9:
            out["ocr"] = [_ocr_hit(f, rng.random() * 9) for f in rng.sample(frames, rng.randrange(1, len(frames) + 1))]
        if rng.random() < 0.5:
            out["object"] = [
                (FrameKey("g", "v", int(f.rsplit("/", 1)[1])), rng.randrange(1, 6))
                for f in rng.sample(frames, rng.randrange(1, len(frames) + 1))
            ]
        return out

    # Order invariance, 10,000 generated cases.
    for _ in range(10_000):
        results = random_results()
        weights = ModalityWeights(
            semantic=rng.choice([0.2, 0.5, 1.0]),
            asr=0.0,
            ocr=rng.choice([0.2, 0.5, 1.0]),
            object=rng.choice([0.0, 0.1, 0.5]),
        )
        forward = fuse(results, weights)
        backward = fuse(dict(reversed(list(results.items()))), weights)
        assert forward == backward
        for frame in forward:
            assert 0.0 <= frame.fused <= 1.0

    # Monotonicity (dominance incl. extra modalities), 10,000 generated cases.
    for _ in range(10_000):
        y_sem = rng.random()
        x_sem = y_sem + rng.random() * (1.0 - y_sem)
        results = {
            "semantic": [_vhit("g/x/1", x_sem), _vhit("g/y/1", y_sem), _vhit("g/z/1", 0.0), _vhit("g/w/1", 1.0)],
            "ocr": [_ocr_hit("g/x/1", 9.0 + rng.random()), _ocr_hit("g/q/1", 9.0), _ocr_hit("g/r/1", 0.0)],
        }
        fused = {f.key.text: f.fused for f in fuse(results, ModalityWeights(1.0, 0.0, 1.0, 0.0))}
        assert fused["g/x/1"] >= fused["g/y/1"]

    report("fusion formula (0.7 exact twice; order-invariance + monotonicity x 10k each)")


def test_temporal_retrieval_matches_brute_force_oracle():
    dimension = 16
    embedder = MockEmbeddingClient(dimension=dimension)
    rng = np.random.default_rng(77)
    index = VectorIndex(dimension)
    corpus: dict[tuple[str, str], list[np.ndarray]] = {}
    for v in range(20):
        video = ("G1", f"V{v:03d}")
        vectors = []
        for f in range(6):
            vec = rng.standard_normal(dimension)
            vectors.append(vec / np.linalg.norm(vec))
            index.add_embedding(FrameKey(video[0], video[1], f * 25), vec)
        corpus[video] = vectors
    index.freeze()

    queries = ["the rocket on the launch pad", "ignition and liftoff", "the booster landing"]

    def oracle(k_per_step: int):
        steps = []
        for query in queries:
            q = embedder.embed_text(query)
            q = q / np.linalg.norm(q)
            best = {video: max(float(np.dot(vec, q)) for vec in vectors) for video, vectors in corpus.items()}
            steps.append(dict(sorted(best.items(), key=lambda item: (-item[1], item[0]))[:k_per_step]))
        candidates = set(steps[0])
        for step in steps[1:]:
            candidates &= set(step)
        rows = [(video, min(step[video] for step in steps)) for video in candidates]
        rows.sort(key=lambda r: (-r[1], r[0]))
        return rows

    for depth in (2, 5, 10, 20):
        got = temporal_search(queries, embedder=embedder, vectors=index, k_per_step=depth)
        expected = oracle(depth)
        assert [v.video for v in got] == [video for video, _ in expected]
        for v, (_, score) in zip(got, expected):
            assert abs(v.score - score) < 1e-9

    # Exclusion: a video present in only one step never returns.
    lonely = VectorIndex(dimension)
    lonely.add_embedding(FrameKey("g", "A", 0), embedder.embed_text("step one"))
    lonely.add_embedding(FrameKey("g", "A", 10), embedder.embed_text("step two"))
    lonely.add_embedding(FrameKey("g", "B", 0), embedder.embed_text("step one"))
    lonely.freeze()
    got = temporal_search(["step one", "step two"], embedder=embedder, vectors=lonely, k_per_step=1)
    assert [v.video_id for v in got] == ["A"]
    report("temporal retrieval (20 videos x 3 steps vs intersection+min oracle; exclusion)")


def test_i2i_dedup_and_cardinality_sweep():
    kb = LandmarkKB(
        [
            LandmarkEntry(name="Ben Thanh Market", visual_description="yellow market hall", city="Ho Chi Minh City"),
            LandmarkEntry(name="Turtle Tower", visual_description="tiered tower on a lake island", city="Hanoi"),
        ]
    )
    embedder = MockEmbeddingClient(dimension=8)
    overlap = [(f"g/v/{i}", 1.0 - i / 20) for i in range(12)]

    class StubIndex:
        def search(self, vector, k, scope_filter=None):
            from frameseek.catalog import parse_frame_key

            salt = float(vector[0])
            hits = [VectorHit(parse_frame_key(t), round(s + salt * 1e-9, 12)) for t, s in overlap]
            hits.sort(key=lambda h: (-h.score, h.key.text))
            return hits[:k]

    # Explicit dedup-by-max example: same frame at 0.8 and 0.9 resolves to 0.9.
    class PairIndex:
        def __init__(self):
            self.calls = 0

        def search(self, vector, k, scope_filter=None):
            self.calls += 1
            score = 0.8 if self.calls == 1 else 0.9
            return [VectorHit(FrameKey("g", "v", 7), score)][:k]

    result = i2i_search(
        "Ben Thanh Market",
        I2IParams(per_reference_top_k=5, max_landmarks=1, images_per_landmark=2),
        kb=kb,
        llm=MockLlmClient(),
        image_search=FixtureImageSearchClient({"Ben Thanh Market": ["r1", "r2"]}),
        embedder=embedder,
        index=PairIndex(),
    )
    assert [(h.key.text, h.score) for h in result.hits] == [("g/v/7", 0.9)]

    table = {
        "Ben Thanh Market": ["r1", "r2", "r3"],
        "Ben Thanh Market Ho Chi Minh City": ["r2", "r4"],
        "Turtle Tower": ["t1", "t2"],
        "Turtle Tower Hanoi": ["t3"],
    }
    for per_ref in (1, 2, 5, 12):
        for max_lm in (1, 2):
            for per_lm in (1, 2, 3):
                result = i2i_search(
                    "Ben Thanh Market and Turtle Tower",
                    I2IParams(per_reference_top_k=per_ref, max_landmarks=max_lm, images_per_landmark=per_lm),
                    kb=kb,
                    llm=MockLlmClient(),
                    image_search=FixtureImageSearchClient(table),
                    embedder=embedder,
                    index=StubIndex(),
                )
                texts = [h.key.text for h in result.hits]
                assert len(texts) == len(set(texts)), "duplicate keys in merged output"
                assert len(texts) <= max_lm * per_lm * per_ref
                scores = [h.score for h in result.hits]
                assert scores == sorted(scores, reverse=True)
    report("i2i (dedup-by-max 0.8/0.9 -> 0.9; cardinality bound over parameter sweep)")


def test_evaluation_rank6_and_prefix_max_oracle():
    gt = GroundTruthItem(query_id="q", task="KIS", video_name="L01_V003", segments=((40, 60),))

    def predictions(correct_ranks, n=10):
        return [
            Prediction(rank, "L01_V003" if rank in correct_ranks else "L99_V999", (50,))
            for rank in range(1, n + 1)
        ]

    assert final_score(predictions({6}), gt, KSet((1, 5, 20, 50, 100))) == (0 + 0 + 1 + 1 + 1) / 5

    rng = random.Random(20250808)
    ks = KSet()
    for _ in range(1000):
        n = rng.randrange(0, 130)
        correct = {r for r in range(1, n + 1) if rng.random() < 0.04}
        preds = predictions(correct, n=n)
        by_rank = {p.rank: r_score(p, gt) for p in preds}
        oracle = sum(max((by_rank.get(r, 0.0) for r in range(1, k + 1)), default=0.0) for k in ks.ks) / len(ks.ks)
        assert final_score(preds, gt, ks) == oracle
    report("evaluation (rank-6-only = 0.6 exact; prefix-max oracle x 1000 submissions)")


def test_diacritic_stripping_examples_and_idempotence():
    assert strip_diacritics("Bến Thành") == "Ben Thanh"
    assert strip_diacritics("đường Đà Nẵng") == "duong Da Nang"
    alphabet = (
        "aàáảãạăằắẳẵặâầấẩẫậbcdđeèéẻẽẹêềếểễệghiìíỉĩịklmnoòóỏõọôồốổỗộơờớởỡợpqrstuùúủũụưừứửữựvxyỳýỷỹỵ"
        "AÀÁẢÃẠĂẰẮẲẴẶÂẦẤẨẪẬBCDĐEÈÉẺẼẸÊỀẾỂỄỆGHIÌÍỈĨỊKLMNOÒÓỎÕỌÔỒỐỔỖỘƠỜỚỞỠỢ "
    )
    rng = random.Random(404)
    for _ in range(500):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 50)))
        stripped = strip_diacritics(text)
        assert strip_diacritics(stripped) == stripped
    report("diacritic stripping (both examples; idempotence x 500 strings)")


def test_end_to_end_landmark_effect(engine):
    query = "The clip shows Ben Thanh Market"
    target = "L01/V001/37"
    semantic_top = engine.search("semantic", query, k=1)["results"][0]["key"]
    llandmark = engine.search("llandmark", query, k=5)
    assert llandmark["results"][0]["key"] == target
    assert semantic_top != target
    report("end-to-end landmark effect (llandmark top-1 = target; plain semantic is not)")


def test_mock_mode_determinism_no_network(engine):
    assert engine.config.mock_mode
    query = "The clip shows Ben Thanh Market"
    a = engine.search("llandmark", query, k=10)
    b = engine.search("llandmark", query, k=10)
    a.pop("timing_ms")
    b.pop("timing_ms")
    assert json.dumps(a, sort_keys=True).encode() == json.dumps(b, sort_keys=True).encode()
    report("determinism (byte-identical llandmark rankings, MOCK_MODE=1, sockets blocked)")
