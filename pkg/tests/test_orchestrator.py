"""Fusion formula, temporal intersection+min against oracles, execution isolation."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from frameseek.catalog import Catalog, FrameKey, Shot
from frameseek.clients import MockEmbeddingClient, MockLlmClient
from frameseek.errors import PipelineError, SynthesisError, TransportError
from frameseek.object_index import ObjectQuery
from frameseek.orchestrator import (
    EvidencePackage,
    ScoredFrame,
    execute_plan,
    fuse,
    group_by_video,
    synthesize_answer,
    temporal_search,
)
from frameseek.planner import ModalityWeights, SearchPlan
from frameseek.text_index import CHANNEL_ASR, CHANNEL_OCR, TextDoc, TextHit, TextIndex
from frameseek.vector_index import VectorHit, VectorIndex


def vhit(text: str, score: float) -> VectorHit:
    from frameseek.catalog import parse_frame_key

    return VectorHit(parse_frame_key(text), score)


def ocr_hit(text_key: str, score: float) -> TextHit:
    from frameseek.catalog import parse_frame_key

    key = parse_frame_key(text_key)
    doc = TextDoc(doc_id=f"ocr:{text_key}", group_id=key.group_id, video_id=key.video_id,
                  start_frame=key.frame_id, end_frame=key.frame_id, channel=CHANNEL_OCR, text="t")
    return TextHit(doc=doc, score=score)


def asr_hit(group: str, video: str, start: int, end: int, score: float) -> TextHit:
    doc = TextDoc(doc_id=f"asr:{group}/{video}:{start}", group_id=group, video_id=video,
                  start_frame=start, end_frame=end, channel=CHANNEL_ASR, text="t")
    return TextHit(doc=doc, score=score)


class TestFuseFormula:
    def test_single_modality_identity(self):
        # Same raw scores twice so min-max keeps 0.8 for the middle frame.
        results = {"semantic": [vhit("g/v/1", 1.0), vhit("g/v/2", 0.8), vhit("g/v/3", 0.0)]}
        fused = fuse(results, ModalityWeights())
        by_key = {f.key.text: f.fused for f in fused}
        assert by_key["g/v/2"] == 0.8

    def test_equal_weights_mean(self):
        results = {
            "semantic": [vhit("g/v/1", 1.0), vhit("g/v/7", 0.8), vhit("g/v/2", 0.0)],
            "ocr": [ocr_hit("g/v/7", 3.0), ocr_hit("g/v/8", 5.0), ocr_hit("g/v/9", 0.0)],
        }
        # g/v/7: semantic norm 0.8, ocr norm 0.6
        fused = fuse(results, ModalityWeights(semantic=1.0, asr=0.0, ocr=1.0, object=0.0))
        by_key = {f.key.text: f.fused for f in fused}
        assert by_key["g/v/7"] == 0.7  # exactly

    def test_weighted_mean_two_to_one(self):
        results = {
            "semantic": [vhit("g/v/1", 1.0), vhit("g/v/7", 0.9), vhit("g/v/2", 0.0)],
            "ocr": [ocr_hit("g/v/7", 0.3), ocr_hit("g/v/8", 1.0), ocr_hit("g/v/9", 0.0)],
        }
        fused = fuse(results, ModalityWeights(semantic=2.0, asr=0.0, ocr=1.0, object=0.0))
        by_key = {f.key.text: f.fused for f in fused}
        assert by_key["g/v/7"] == 0.7  # exactly, via exact rational reduction

    def test_absent_modalities_do_not_penalize(self):
        results = {
            "semantic": [vhit("g/v/1", 1.0), vhit("g/v/2", 0.5), vhit("g/v/3", 0.0)],
        }
        fused = fuse(results, ModalityWeights(semantic=0.1, asr=0.9, ocr=0.0, object=0.0))
        by_key = {f.key.text: f.fused for f in fused}
        assert by_key["g/v/2"] == 0.5  # denominator only counts present modalities

    def test_single_element_list_normalizes_to_one(self):
        fused = fuse({"semantic": [vhit("g/v/1", 0.123)]}, ModalityWeights())
        assert fused[0].fused == 1.0

    def test_empty_input(self):
        assert fuse({}, ModalityWeights()) == []
        assert fuse({"semantic": []}, ModalityWeights()) == []

    def test_sorted_with_key_tiebreak(self):
        results = {"semantic": [vhit("g/b/1", 0.5), vhit("g/a/1", 0.5), vhit("g/c/1", 0.0)]}
        fused = fuse(results, ModalityWeights())
        assert [f.key.text for f in fused] == ["g/a/1", "g/b/1", "g/c/1"]

    def test_asr_projection_onto_keyframes(self):
        catalog = Catalog()
        catalog.add_shot(Shot("g", "v", 0, 100))  # keyframes 15, 50, 85
        results = {"asr": [asr_hit("g", "v", 40, 90, 2.0), asr_hit("g", "v", 0, 10, 1.0)]}
        fused = fuse(results, ModalityWeights(), catalog=catalog)
        by_key = {f.key.text: f.per_modality["asr"] for f in fused}
        assert set(by_key) == {"g/v/50", "g/v/85"}  # 15 is outside 40..90
        assert by_key["g/v/50"] == 1.0

    def test_asr_without_catalog_raises(self):
        with pytest.raises(ValueError, match="catalog"):
            fuse({"asr": [asr_hit("g", "v", 0, 10, 1.0)]}, ModalityWeights())

    def test_object_counts_normalized(self):
        results = {"object": [(FrameKey("g", "v", 1), 4), (FrameKey("g", "v", 2), 1), (FrameKey("g", "v", 3), 2)]}
        fused = fuse(results, ModalityWeights())
        by_key = {f.key.text: f.per_modality["object"] for f in fused}
        assert by_key == {"g/v/1": 1.0, "g/v/2": 0.0, "g/v/3": pytest.approx(1 / 3)}


def fuse_oracle(per_modality: dict[str, dict[str, float]], weights: dict[str, float]) -> dict[str, float]:
    """Independent fraction-based weighted average over normalized scores."""
    keys = {k for scores in per_modality.values() for k in scores}
    out = {}
    for key in keys:
        num = Fraction(0)
        den = Fraction(0)
        for modality, scores in per_modality.items():
            if key in scores and weights[modality] > 0:
                num += Fraction(weights[modality]) * Fraction(scores[key])
                den += Fraction(weights[modality])
        if den:
            out[key] = float(num / den)
    return out


class TestFuseProperties:
    def make_results(self, rng: random.Random):
        frames = [f"g/v/{i}" for i in range(rng.randrange(2, 8))]
        results: dict[str, list] = {}
        if rng.random() < 0.9:
            results["semantic"] = [vhit(f, rng.random()) for f in rng.sample(frames, rng.randrange(1, len(frames) + 1))]
        if rng.random() < 0.9:
            results["ocr"] = [ocr_hit(f, rng.random() * 10) for f in rng.sample(frames, rng.randrange(1, len(frames) + 1))]
        if rng.random() < 0.6:
            results["object"] = [
                (FrameKey("g", "v", int(f.split("/")[-1])), rng.randrange(1, 6))
                for f in rng.sample(frames, rng.randrange(1, len(frames) + 1))
            ]
        return results

    def test_order_invariance_and_range_over_10000_cases(self):
        rng = random.Random(20250808)
        for _ in range(10_000):
            results = self.make_results(rng)
            weights = ModalityWeights(
                semantic=rng.choice([0.0, 0.3, 0.5, 1.0]),
                asr=0.0,
                ocr=rng.choice([0.2, 0.5, 1.0]),
                object=rng.choice([0.0, 0.1, 0.5]),
            )
            forward = fuse(results, weights)
            reversed_results = dict(reversed(list(results.items())))
            backward = fuse(reversed_results, weights)
            assert forward == backward
            for frame in forward:
                assert 0.0 <= frame.fused <= 1.0

    def test_monotonicity_superset_dominance(self):
        # X beats Y in the shared modality, appears in a superset of
        # modalities, and its extra-modality scores dominate Y's best score;
        # with equal weights X must not rank below Y. (Without the dominance
        # condition on the extra modality the statement is false: a weak extra
        # score drags the average down.)
        rng = random.Random(99)
        for _ in range(2000):
            y_sem = rng.random()
            x_sem = y_sem + rng.random() * (1 - y_sem)
            x_ocr_raw = 10.0 + rng.random()  # normalizes to >= y best
            results = {
                "semantic": [vhit("g/x/1", x_sem), vhit("g/y/1", y_sem), vhit("g/z/1", 0.0), vhit("g/w/1", 1.0)],
                "ocr": [ocr_hit("g/x/1", x_ocr_raw), ocr_hit("g/q/1", 10.0), ocr_hit("g/r/1", 0.0)],
            }
            weights = ModalityWeights(semantic=1.0, asr=0.0, ocr=1.0, object=0.0)
            fused = {f.key.text: f.fused for f in fuse(results, weights)}
            assert fused["g/x/1"] >= fused["g/y/1"]

    def test_raising_weight_never_demotes_modality_leader(self):
        # A is the leader of the ocr modality (normalized 1.0); B has no ocr
        # evidence. Once A ranks at or above B, raising the ocr weight keeps
        # it there.
        rng = random.Random(123)
        for _ in range(2000):
            results = {
                "semantic": [
                    vhit("g/a/1", rng.random()),
                    vhit("g/b/1", rng.random()),
                    vhit("g/c/1", 0.0),
                    vhit("g/d/1", 1.0),
                ],
                "ocr": [ocr_hit("g/a/1", 5.0), ocr_hit("g/e/1", rng.random()), ocr_hit("g/f/1", 0.0)],
            }
            w1 = rng.random() * 2
            w2 = w1 + rng.random() * 3
            fused1 = {f.key.text: f.fused for f in fuse(results, ModalityWeights(1.0, 0.0, max(w1, 1e-9), 0.0))}
            fused2 = {f.key.text: f.fused for f in fuse(results, ModalityWeights(1.0, 0.0, max(w2, 1e-9), 0.0))}
            if fused1["g/a/1"] >= fused1["g/b/1"]:
                assert fused2["g/a/1"] >= fused2["g/b/1"]

    def test_matches_independent_oracle(self):
        rng = random.Random(7)
        for _ in range(500):
            results = self.make_results(rng)
            weights = ModalityWeights(semantic=0.5, asr=0.0, ocr=0.3, object=0.2)
            fused = fuse(results, weights)
            # Recompute normalized scores the slow way.
            normalized: dict[str, dict[str, float]] = {}
            for modality, rows in results.items():
                if modality == "semantic":
                    raw = {h.key.text: h.score for h in rows}
                elif modality == "ocr":
                    raw = {f"{h.doc.group_id}/{h.doc.video_id}/{h.doc.start_frame}": h.score for h in rows}
                else:
                    raw = {key.text: float(c) for key, c in rows}
                lo, hi = min(raw.values()), max(raw.values())
                normalized[modality] = {
                    k: 1.0 if hi == lo else (v - lo) / (hi - lo) for k, v in raw.items()
                }
            expected = fuse_oracle(normalized, weights.as_dict())
            assert {f.key.text: f.fused for f in fused} == expected


def temporal_oracle(corpus: dict[tuple[str, str], list], queries: list[str], embedder, k_per_step: int):
    """Enumerate every video, recompute per-step max similarity, intersect, min."""
    import numpy as np

    steps = []
    for query in queries:
        q = embedder.embed_text(query)
        q = q / np.linalg.norm(q)
        best = {}
        for video, vectors in corpus.items():
            scores = [float(np.dot(v / np.linalg.norm(v), q)) for v in vectors]
            best[video] = max(scores)
        ranked = sorted(best.items(), key=lambda item: (-item[1], item[0]))[:k_per_step]
        steps.append(dict(ranked))
    candidates = set(steps[0])
    for step in steps[1:]:
        candidates &= set(step)
    rows = [(video, min(step[video] for step in steps)) for video in candidates]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows


class TestTemporal:
    def build_corpus(self, rng, n_videos=20, frames_per_video=5, dimension=16):
        import numpy as np

        embedder = MockEmbeddingClient(dimension=dimension)
        index = VectorIndex(dimension)
        corpus: dict[tuple[str, str], list] = {}
        for v in range(n_videos):
            video = ("G1", f"V{v:03d}")
            vectors = []
            for f in range(frames_per_video):
                vec = np.asarray(rng.standard_normal(dimension))
                vectors.append(vec)
                index.add_embedding(FrameKey(video[0], video[1], f * 10), vec)
            corpus[video] = vectors
        index.freeze()
        return embedder, index, corpus

    def test_single_query_degenerates_to_max_ranking(self):
        import numpy as np

        rng = np.random.default_rng(31)
        embedder, index, corpus = self.build_corpus(rng)
        got = temporal_search(["a boat"], embedder=embedder, vectors=index, k_per_step=50)
        expected = temporal_oracle(corpus, ["a boat"], embedder, 50)
        assert [(v.video, v.score) for v in got] == [(video, pytest.approx(score)) for video, score in expected]

    def test_matches_oracle_three_steps(self):
        import numpy as np

        rng = np.random.default_rng(32)
        embedder, index, corpus = self.build_corpus(rng)
        queries = ["first event", "second event", "third event"]
        for depth in (3, 5, 20):
            got = temporal_search(queries, embedder=embedder, vectors=index, k_per_step=depth)
            expected = temporal_oracle(corpus, queries, embedder, depth)
            assert [(v.video, v.score) for v in got] == [(video, pytest.approx(score)) for video, score in expected]

    def test_min_aggregation_example(self):
        import numpy as np

        # Two steps; A scores (0.9, 0.4), B scores (0.6, 0.5). The minimum
        # rule ranks B (0.5) above A (0.4).
        embedder = MockEmbeddingClient(dimension=8)
        q1 = embedder.embed_text("step one")
        q2 = embedder.embed_text("step two")
        # Orthonormal basis spanning q1, q2, and one spare direction.
        e1 = q1 / np.linalg.norm(q1)
        r = q2 - (q2 @ e1) * e1
        e2 = r / np.linalg.norm(r)
        spare = np.zeros(8)
        spare[int(np.argmin(np.abs(e1) + np.abs(e2)))] = 1.0
        r3 = spare - (spare @ e1) * e1 - (spare @ e2) * e2
        e3 = r3 / np.linalg.norm(r3)
        q2_hat = q2 / np.linalg.norm(q2)
        alpha, beta = float(q2_hat @ e1), float(q2_hat @ e2)

        def unit_vector_with_cosines(c1: float, c2: float) -> np.ndarray:
            # v = a e1 + b e2 + c e3 with ||v|| = 1, v.q1hat = c1, v.q2hat = c2.
            a = c1
            b = (c2 - c1 * alpha) / beta
            c = np.sqrt(max(1.0 - a * a - b * b, 0.0))
            return a * e1 + b * e2 + c * e3

        index = VectorIndex(8)
        index.add_embedding(FrameKey("g", "A", 0), unit_vector_with_cosines(0.9, 0.4))
        index.add_embedding(FrameKey("g", "B", 0), unit_vector_with_cosines(0.6, 0.5))
        index.freeze()
        got = temporal_search(["step one", "step two"], embedder=embedder, vectors=index, k_per_step=10)
        assert [(v.video_id, pytest.approx(v.score, abs=1e-9)) for v in got] == [("B", 0.5), ("A", 0.4)]

    def test_video_missing_from_one_step_excluded(self):
        import numpy as np

        embedder = MockEmbeddingClient(dimension=8)
        index = VectorIndex(8)
        index.add_embedding(FrameKey("g", "A", 0), embedder.embed_text("first event"))
        index.add_embedding(FrameKey("g", "A", 10), embedder.embed_text("second event"))
        index.add_embedding(FrameKey("g", "C", 0), embedder.embed_text("first event"))
        index.freeze()
        # Depth 1: step 1 picks the best video only; C ties A on step 1 but
        # loses step 2 entirely at depth 1.
        got = temporal_search(["first event", "second event"], embedder=embedder, vectors=index, k_per_step=1)
        assert [v.video_id for v in got] == ["A"]

    def test_empty_queries_rejected(self):
        embedder = MockEmbeddingClient(dimension=8)
        index = VectorIndex(8)
        index.freeze()
        with pytest.raises(ValueError):
            temporal_search([], embedder=embedder, vectors=index)


class StubTexts:
    frozen = True

    def __init__(self, hits):
        self.hits = hits

    def search_text(self, query, channel=None, k=10):
        return self.hits.get(channel, [])[:k]

    def docs_for_video(self, group_id, video_id, channel=None):
        return []


class FailingObjects:
    def filter_frames(self, query, k):
        raise RuntimeError("store corrupted")


class TestExecutePlan:
    def plan(self, **kwargs):
        defaults = dict(
            original_query="q",
            semantic_query="q",
            weights=ModalityWeights(semantic=1.0, asr=0.0, ocr=0.0, object=0.0),
            top_k_per_modality=10,
        )
        defaults.update(kwargs)
        return SearchPlan(**defaults)

    def build_semantic(self):
        embedder = MockEmbeddingClient(dimension=8)
        index = VectorIndex(8)
        index.add_embedding(FrameKey("g", "v", 1), embedder.embed_text("q"))
        index.freeze()
        return embedder, index

    def test_only_positive_weights_run(self):
        embedder, index = self.build_semantic()
        result = execute_plan(self.plan(), embedder=embedder, vectors=index, texts=StubTexts({}))
        assert set(result.results) == {"semantic"}

    def test_determinism(self):
        embedder, index = self.build_semantic()
        plan = self.plan()
        a = execute_plan(plan, embedder=embedder, vectors=index)
        b = execute_plan(plan, embedder=embedder, vectors=index)
        assert a.results == b.results

    def test_failure_isolation(self):
        embedder, index = self.build_semantic()
        plan = self.plan(
            weights=ModalityWeights(semantic=1.0, asr=0.0, ocr=0.0, object=1.0),
            object_query=ObjectQuery(("person",)),
        )
        result = execute_plan(plan, embedder=embedder, vectors=index, objects=FailingObjects())
        assert result.results["semantic"]
        assert result.results["object"] == []
        assert any("object" in w for w in result.warnings)

    def test_all_failures_aggregate_error(self):
        plan = self.plan(
            weights=ModalityWeights(semantic=0.0, asr=0.0, ocr=0.0, object=1.0),
            object_query=ObjectQuery(("person",)),
        )
        with pytest.raises(PipelineError, match="every modality failed"):
            execute_plan(plan, objects=FailingObjects())


class TestGroupByVideo:
    def frames(self):
        return [
            ScoredFrame(FrameKey("g", "v1", 10), {"semantic": 1.0}, 1.0),
            ScoredFrame(FrameKey("g", "v2", 5), {"semantic": 0.9}, 0.9),
            ScoredFrame(FrameKey("g", "v1", 20), {"semantic": 0.2}, 0.2),
        ]

    def test_two_videos_two_packages(self):
        packages = group_by_video(self.frames())
        assert len(packages) == 2
        assert packages[0].video == ("g", "v1")

    def test_empty(self):
        assert group_by_video([]) == []

    def test_order_follows_best_fused(self):
        frames = [
            ScoredFrame(FrameKey("g", "a", 1), {"semantic": 0.3}, 0.3),
            ScoredFrame(FrameKey("g", "b", 1), {"semantic": 0.8}, 0.8),
            ScoredFrame(FrameKey("g", "c", 1), {"semantic": 0.5}, 0.5),
            ScoredFrame(FrameKey("g", "b", 2), {"semantic": 0.1}, 0.1),
        ]
        packages = group_by_video(frames)
        assert [p.video_id for p in packages] == ["b", "c", "a"]

    def test_pulls_overlapping_evidence(self):
        texts = TextIndex()
        texts.index_document(TextDoc(doc_id="a1", group_id="g", video_id="v1", start_frame=0, end_frame=15,
                                     channel=CHANNEL_ASR, text="covers frame ten"))
        texts.index_document(TextDoc(doc_id="a2", group_id="g", video_id="v1", start_frame=100, end_frame=110,
                                     channel=CHANNEL_ASR, text="far away"))
        texts.index_document(TextDoc(doc_id="o1", group_id="g", video_id="v1", start_frame=10, end_frame=10,
                                     channel=CHANNEL_OCR, text="on the frame"))
        texts.freeze()
        packages = group_by_video(self.frames(), texts=texts)
        v1 = next(p for p in packages if p.video_id == "v1")
        assert [h.doc.doc_id for h in v1.asr_snippets] == ["a1"]
        assert [h.doc.doc_id for h in v1.ocr_texts] == ["o1"]


class TestSynthesizeAnswer:
    def package(self):
        return EvidencePackage(
            group_id="g",
            video_id="v",
            frames=[ScoredFrame(FrameKey("g", "v", 12), {"semantic": 1.0}, 1.0)],
        )

    def test_mock_cites_top_frame(self):
        answer = synthesize_answer([self.package()], "what is shown?", MockLlmClient())
        assert answer.cited_frames == [FrameKey("g", "v", 12)]
        assert "g/v/12" in answer.answer

    def test_unknown_citation_dropped_with_warning(self):
        class Scripted:
            def complete(self, prompt):
                return "Something.\nCITED: g/v/12; g/v/999"

        answer = synthesize_answer([self.package()], "q", Scripted())
        assert answer.cited_frames == [FrameKey("g", "v", 12)]
        assert any("999" in w for w in answer.warnings)

    def test_empty_packages_precondition(self):
        with pytest.raises(ValueError):
            synthesize_answer([], "q", MockLlmClient())

    def test_llm_failure_carries_evidence(self):
        class Down:
            def complete(self, prompt):
                raise TransportError("offline")

        with pytest.raises(SynthesisError) as excinfo:
            synthesize_answer([self.package()], "q", Down())
        assert excinfo.value.packages[0].video == ("g", "v")
