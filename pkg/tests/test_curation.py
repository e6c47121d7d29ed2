from __future__ import annotations

import numpy as np
import pytest

from qaforge.catalog import ContentType
from qaforge.curation import (
    CurationConfig,
    DedupMode,
    QaPair,
    QaStatus,
    QuestionKind,
    Verdict,
    dedup_exact,
    dedup_semantic,
    entailment_screen,
    filter_rules,
    retention_report,
    REASON_BANNED,
    REASON_TOKEN_LIMIT,
    REASON_TOO_SHORT,
)
from qaforge.errors import EmbedderFailure, NonMonotoneCounts

from conftest import ConstEntailment, MapEmbedder


def make_pair(qa_id: str, question: str, answer: str = "a perfectly reasonable answer", priority: int = 0, group: str | None = None) -> QaPair:
    return QaPair(
        qa_id=qa_id,
        group_id=group or f"g-{qa_id}",
        question=question,
        answer=answer,
        question_kind=QuestionKind.TOOL_GENERAL,
        source_id="src",
        content_type=ContentType.WEBSITE,
        source_priority=priority,
    )


# ---------------------------------------------------------------------------
# exact dedup
# ---------------------------------------------------------------------------

def test_dedup_exact_normalizes_whitespace_and_case():
    pairs = [make_pair("a", "How to run PLINK?"), make_pair("b", "how  to run plink?")]
    survivors = dedup_exact(pairs)
    assert [p.qa_id for p in survivors] == ["a"]
    assert survivors[0].status == QaStatus.DEDUPED


def test_dedup_exact_identity_on_distinct_questions():
    pairs = [make_pair("a", "q one"), make_pair("b", "q two")]
    assert [p.qa_id for p in dedup_exact(pairs)] == ["a", "b"]


def test_dedup_exact_prefers_lowest_priority_then_id():
    pairs = [
        make_pair("x", "same question", priority=2),
        make_pair("y", "same question", priority=0),
        make_pair("z", "same question", priority=1),
    ]
    assert [p.qa_id for p in dedup_exact(pairs)] == ["y"]


# ---------------------------------------------------------------------------
# semantic dedup
# ---------------------------------------------------------------------------

def _embedder_for(questions_to_vectors: dict[str, list[float]]) -> MapEmbedder:
    dim = len(next(iter(questions_to_vectors.values())))
    return MapEmbedder(questions_to_vectors, dim=dim)


def test_dedup_semantic_removes_later_near_duplicate():
    # cos(v1, v2) = 0.96 by construction
    v1 = np.array([1.0, 0.0])
    angle = np.arccos(0.96)
    v2 = np.array([np.cos(angle), np.sin(angle)])
    emb = _embedder_for({"first": list(v1), "second": list(v2)})
    pairs = [make_pair("a", "first"), make_pair("b", "second")]
    kept = dedup_semantic(pairs, emb, CurationConfig())
    assert [p.qa_id for p in kept] == ["a"]


def test_dedup_semantic_keeps_orthogonal_vectors():
    emb = _embedder_for({"first": [1.0, 0.0], "second": [0.0, 1.0]})
    pairs = [make_pair("a", "first"), make_pair("b", "second")]
    assert len(dedup_semantic(pairs, emb, CurationConfig())) == 2


def test_dedup_semantic_threshold_is_inclusive():
    angle = np.arccos(0.95)
    emb = _embedder_for({"first": [1.0, 0.0], "second": [float(np.cos(angle)), float(np.sin(angle))]})
    pairs = [make_pair("a", "first"), make_pair("b", "second")]
    kept = dedup_semantic(pairs, emb, CurationConfig(semantic_threshold=0.95))
    assert [p.qa_id for p in kept] == ["a"]


def test_dedup_semantic_is_idempotent_and_clean(hashing_embedder):
    rng = np.random.default_rng(17)
    base_questions = [f"question about topic {i} and its settings" for i in range(60)]
    near_dupes = [q + "?" for q in base_questions[:15]]
    pairs = [make_pair(f"p{i}", q) for i, q in enumerate(base_questions + near_dupes)]
    rng.shuffle(pairs)
    config = CurationConfig(semantic_threshold=0.95)
    once = dedup_semantic(pairs, hashing_embedder, config)
    twice = dedup_semantic(once, hashing_embedder, config)
    assert [p.qa_id for p in once] == [p.qa_id for p in twice]
    vectors = np.vstack([
        np.asarray(hashing_embedder.embed(p.question)) for p in once
    ])
    sims = vectors @ vectors.T
    np.fill_diagonal(sims, 0.0)
    assert float(sims.max()) < 0.95


def test_dedup_semantic_propagates_embedder_failure():
    emb = _embedder_for({"first": [1.0, 0.0]})
    pairs = [make_pair("a", "first"), make_pair("b", "missing")]
    with pytest.raises(EmbedderFailure, match="b"):
        dedup_semantic(pairs, emb, CurationConfig())


def test_approx_neighbor_recall_on_planted_duplicates():
    rng = np.random.default_rng(99)
    config = CurationConfig(semantic_threshold=0.95)
    planted_total = 0
    removed_total = 0
    for trial in range(100):
        base = rng.standard_normal((40, 24))
        base /= np.linalg.norm(base, axis=1, keepdims=True)
        mapping: dict[str, list[float]] = {}
        pairs = []
        for i in range(40):
            q = f"t{trial}-q{i}"
            mapping[q] = list(base[i])
            pairs.append(make_pair(f"t{trial}-p{i}", q))
        # plant 8 near-duplicates at cosine >= 0.99
        for j in range(8):
            noisy = base[j] + rng.standard_normal(24) * 0.02
            noisy /= np.linalg.norm(noisy)
            if float(noisy @ base[j]) < 0.99:
                noisy = base[j]
            q = f"t{trial}-dupe{j}"
            mapping[q] = list(noisy)
            pairs.append(make_pair(f"t{trial}-d{j}", q))
        emb = _embedder_for(mapping)
        kept = dedup_semantic(pairs, emb, config, mode=DedupMode.APPROX_NEIGHBOR, seed=trial)
        kept_ids = {p.qa_id for p in kept}
        planted_total += 8
        removed_total += sum(1 for j in range(8) if f"t{trial}-d{j}" not in kept_ids)
    assert removed_total / planted_total >= 0.95


def test_exhaustive_and_approx_agree_when_buckets_cover():
    emb = _embedder_for({"first": [1.0, 0.0, 0.0], "second": [1.0, 0.0, 0.0], "third": [0.0, 1.0, 0.0]})
    pairs = [make_pair("a", "first"), make_pair("b", "second"), make_pair("c", "third")]
    config = CurationConfig()
    exhaustive = dedup_semantic(pairs, emb, config, mode=DedupMode.EXHAUSTIVE)
    approx = dedup_semantic(pairs, emb, config, mode=DedupMode.APPROX_NEIGHBOR, seed=1)
    assert [p.qa_id for p in exhaustive] == [p.qa_id for p in approx] == ["a", "c"]


# ---------------------------------------------------------------------------
# rule filters
# ---------------------------------------------------------------------------

def test_filter_rules_banned_phrases():
    config = CurationConfig()
    pairs = [
        make_pair("a", "q1", "The source does not contain information on this."),
        make_pair("b", "q2", "Sadly the Answer Does Not Exist in the text."),
        make_pair("c", "q3", "everything except does not contain information here"),
        make_pair("d", "q4", "A 200-char clean answer about running the tool correctly."),
    ]
    kept, dropped = filter_rules(pairs, config)
    assert [p.qa_id for p in kept] == ["d"]
    assert [(p.qa_id, reason) for p, reason in dropped] == [
        ("a", REASON_BANNED),
        ("b", REASON_BANNED),
        ("c", REASON_BANNED),
    ]


def test_filter_rules_token_limit_and_short():
    config = CurationConfig(max_answer_tokens=2048)
    long_answer = " ".join(f"tok{i}" for i in range(2049))
    pairs = [
        make_pair("long", "q", long_answer),
        make_pair("short", "q2", "tiny"),
        make_pair("ok", "q3", "a sufficiently long clean answer"),
    ]
    kept, dropped = filter_rules(pairs, config)
    reasons = dict((p.qa_id, r) for p, r in dropped)
    assert reasons == {"long": REASON_TOKEN_LIMIT, "short": REASON_TOO_SHORT}
    assert [p.qa_id for p in kept] == ["ok"]


def test_filter_rules_reason_counts_sum():
    config = CurationConfig()
    pairs = [make_pair(f"p{i}", f"q{i}", "answer does not exist" if i % 3 == 0 else "x" * 30) for i in range(12)]
    kept, dropped = filter_rules(pairs, config)
    assert len(kept) + len(dropped) == len(pairs)


# ---------------------------------------------------------------------------
# entailment screen
# ---------------------------------------------------------------------------

def test_entailment_screen_pass_review_fail_bands():
    config = CurationConfig(entailment_threshold=50, review_band=10)
    pairs = [make_pair("a", "the question", "a clean answer body")]
    assert entailment_screen(pairs, ConstEntailment(0.80), config)[0].verdict == Verdict.PASS
    assert entailment_screen(pairs, ConstEntailment(0.55), config)[0].verdict == Verdict.REVIEW
    assert entailment_screen(pairs, ConstEntailment(0.20), config)[0].verdict == Verdict.FAIL


def test_entailment_screen_chunked_max_aggregation():
    class ChunkScorer:
        def entail_probability(self, premise, hypothesis):
            return 0.9 if "needle" in premise else 0.2

    long_answer = ("filler words here. " * 200) + "\n\n" + ("the needle lives here. " * 200)
    config = CurationConfig(chunk_tokens=256)
    judgment = entailment_screen([make_pair("a", "q", long_answer)], ChunkScorer(), config)[0]
    assert len(judgment.chunk_scores) > 1
    assert judgment.aggregate == pytest.approx(90.0)
    assert judgment.aggregate == max(judgment.chunk_scores)


def test_entailment_screen_provider_failure_becomes_fail():
    class Exploding:
        def entail_probability(self, premise, hypothesis):
            raise RuntimeError("nli down")

    config = CurationConfig()
    judgment = entailment_screen([make_pair("a", "q", "answer text here")], Exploding(), config)[0]
    assert judgment.verdict == Verdict.FAIL
    assert "nli down" in judgment.message
    assert judgment.aggregate == max(judgment.chunk_scores)


# ---------------------------------------------------------------------------
# retention report
# ---------------------------------------------------------------------------

def test_retention_report_paper_scale_arithmetic():
    report = retention_report([193_133, 170_000, 160_000, 154_282], {"banned_phrase": 9_000})
    assert report.retention_rate == pytest.approx(0.7989, abs=1e-4)


def test_retention_report_no_drops():
    assert retention_report([100, 100, 100, 100]).retention_rate == 1.0


def test_retention_report_rejects_increase():
    with pytest.raises(NonMonotoneCounts):
        retention_report([10, 12, 9, 9])


def test_status_transitions_only_forward():
    pair = make_pair("a", "q").advance(QaStatus.DEDUPED)
    accepted = pair.advance(QaStatus.ACCEPTED)
    assert accepted.status == QaStatus.ACCEPTED
    with pytest.raises(ValueError):
        accepted.advance(QaStatus.RAW)
