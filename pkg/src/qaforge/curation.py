"""QA-pair lifecycle types plus dedup, rule filtering, and entailment screening."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .catalog import ContentType
from .embedding import unit
from .errors import EmbedderFailure, NonMonotoneCounts
from .textutil import chunk_text, count_tokens, normalize_for_dedup

logger = logging.getLogger(__name__)

# phrases flagging non-answers; matched case-insensitively as substrings
DEFAULT_BANNED_PHRASES = (
    "answer does not exist",
    "source does not contain information",
    "except does not contain information",
)


class QaStatus(str, Enum):
    RAW = "raw"
    DEDUPED = "deduped"
    FILTERED = "filtered"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


_STATUS_ORDER = [QaStatus.RAW, QaStatus.DEDUPED, QaStatus.FILTERED, QaStatus.ACCEPTED, QaStatus.REJECTED]


class QuestionKind(str, Enum):
    TOOL_GENERAL = "tool_general"
    FORUM_GENERAL = "forum_general"
    FORUM_TECHNICAL = "forum_technical"


@dataclass
class QaPair:
    qa_id: str
    group_id: str
    question: str
    answer: str
    question_kind: QuestionKind
    source_id: str
    content_type: ContentType
    status: QaStatus = QaStatus.RAW
    scores: dict[str, float] = field(default_factory=dict)
    source_priority: int = 0

    def __post_init__(self) -> None:
        if not self.question or not self.answer:
            raise ValueError(f"QaPair {self.qa_id} needs a non-empty question and answer")
        if not self.group_id:
            raise ValueError(f"QaPair {self.qa_id} needs a group_id")

    def advance(self, status: QaStatus) -> "QaPair":
        if _STATUS_ORDER.index(status) < _STATUS_ORDER.index(self.status):
            raise ValueError(f"{self.qa_id}: cannot move {self.status.value} -> {status.value}")
        return replace(self, status=status)

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "group_id": self.group_id,
            "question": self.question,
            "answer": self.answer,
            "question_kind": self.question_kind.value,
            "source_id": self.source_id,
            "content_type": self.content_type.value,
            "status": self.status.value,
            "scores": self.scores,
            "source_priority": self.source_priority,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "QaPair":
        return cls(
            qa_id=raw["qa_id"],
            group_id=raw["group_id"],
            question=raw["question"],
            answer=raw["answer"],
            question_kind=QuestionKind(raw["question_kind"]),
            source_id=raw["source_id"],
            content_type=ContentType(raw["content_type"]),
            status=QaStatus(raw.get("status", "raw")),
            scores=raw.get("scores", {}),
            source_priority=raw.get("source_priority", 0),
        )


@dataclass
class CurationConfig:
    semantic_threshold: float = 0.95
    banned_phrases: tuple[str, ...] = DEFAULT_BANNED_PHRASES
    min_answer_chars: int = 20
    max_answer_tokens: int = 2048
    entailment_threshold: float = 50.0
    review_band: float = 10.0
    chunk_tokens: int = 384

    def __post_init__(self) -> None:
        if not (0.0 < self.semantic_threshold <= 1.0):
            raise ValueError("semantic_threshold must be in (0, 1]")
        if self.review_band < 0:
            raise ValueError("review_band must be >= 0")
        if self.chunk_tokens < 32:
            raise ValueError("chunk_tokens must be >= 32")


class DedupMode(str, Enum):
    EXHAUSTIVE = "exhaustive"
    APPROX_NEIGHBOR = "approx_neighbor"


class Verdict(str, Enum):
    PASS = "pass"
    REVIEW = "review"
    FAIL = "fail"


@dataclass
class EntailmentJudgment:
    qa_id: str
    chunk_scores: list[float]
    aggregate: float
    verdict: Verdict
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "chunk_scores": self.chunk_scores,
            "aggregate": self.aggregate,
            "verdict": self.verdict.value,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EntailmentJudgment":
        return cls(
            qa_id=raw["qa_id"],
            chunk_scores=list(raw["chunk_scores"]),
            aggregate=raw["aggregate"],
            verdict=Verdict(raw["verdict"]),
            message=raw.get("message", ""),
        )


@dataclass
class RetentionReport:
    input_count: int
    after_dedup: int
    after_rules: int
    after_entailment: int
    retention_rate: float
    per_reason: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "after_dedup": self.after_dedup,
            "after_rules": self.after_rules,
            "after_entailment": self.after_entailment,
            "retention_rate": self.retention_rate,
            "per_reason": self.per_reason,
        }


# ---------------------------------------------------------------------------
# Deduplication
# ---------------------------------------------------------------------------

def dedup_exact(pairs: Sequence[QaPair]) -> list[QaPair]:
    """Drop pairs whose normalized question already appeared.

    Among duplicates the pair with the lowest (source_priority, qa_id)
    survives; output keeps input order of the survivors, all marked deduped.
    """
    buckets: dict[str, list[QaPair]] = defaultdict(list)
    for pair in pairs:
        buckets[normalize_for_dedup(pair.question)].append(pair)
    winners = {
        min(group, key=lambda p: (p.source_priority, p.qa_id)).qa_id
        for group in buckets.values()
    }
    return [p.advance(QaStatus.DEDUPED) for p in pairs if p.qa_id in winners]


def _question_matrix(pairs: Sequence[QaPair], embedder) -> np.ndarray:
    rows = []
    for pair in pairs:
        try:
            rows.append(unit(np.asarray(embedder.embed(pair.question), dtype=float)))
        except EmbedderFailure:
            raise
        except Exception as exc:
            raise EmbedderFailure(f"embedding failed for {pair.qa_id}: {exc}") from exc
    return np.vstack(rows) if rows else np.zeros((0, 1))


def dedup_semantic(
    pairs: Sequence[QaPair],
    embedder,
    config: CurationConfig,
    mode: DedupMode = DedupMode.EXHAUSTIVE,
    seed: int = 0,
) -> list[QaPair]:
    """Remove near-duplicate questions at cosine >= semantic_threshold (inclusive).

    The later pair in the stable input order is removed. Exhaustive mode checks
    every pair; approx mode buckets by random-hyperplane signatures and only
    guarantees removal among bucket-sharing candidates.
    """
    pairs = list(pairs)
    if len(pairs) < 2:
        return list(pairs)
    vectors = _question_matrix(pairs, embedder)
    threshold = config.semantic_threshold
    if mode is DedupMode.EXHAUSTIVE:
        candidate_sets = None
    else:
        candidate_sets = _lsh_candidates(vectors, seed)
    kept_idx: list[int] = []
    for i in range(len(pairs)):
        against = kept_idx if candidate_sets is None else [j for j in kept_idx if j in candidate_sets[i]]
        if against:
            sims = vectors[against] @ vectors[i]
            if float(sims.max()) >= threshold:
                continue
        kept_idx.append(i)
    return [pairs[i] for i in kept_idx]


def _lsh_candidates(vectors: np.ndarray, seed: int, bands: int = 6, bits: int = 8) -> list[set[int]]:
    """Random-hyperplane signature buckets; returns per-point candidate sets."""
    n, dim = vectors.shape
    rng = np.random.default_rng(seed)
    planes = rng.standard_normal((bands * bits, dim))
    signs = (vectors @ planes.T) >= 0.0
    candidates: list[set[int]] = [set() for _ in range(n)]
    for band in range(bands):
        buckets: dict[bytes, list[int]] = defaultdict(list)
        for i in range(n):
            key = np.packbits(signs[i, band * bits : (band + 1) * bits]).tobytes()
            buckets[key].append(i)
        for members in buckets.values():
            if len(members) < 2:
                continue
            member_set = set(members)
            for i in members:
                candidates[i] |= member_set
    for i, cand in enumerate(candidates):
        cand.discard(i)
    return candidates


# ---------------------------------------------------------------------------
# Rule filters and entailment screening
# ---------------------------------------------------------------------------

REASON_BANNED = "banned_phrase"
REASON_TOO_SHORT = "too_short"
REASON_TOKEN_LIMIT = "token_limit"


def filter_rules(
    pairs: Sequence[QaPair],
    config: CurationConfig,
    tokenizer=None,
) -> tuple[list[QaPair], list[tuple[QaPair, str]]]:
    """Apply the banned-phrase, minimum-length, and token-limit rules in order.

    Each dropped pair carries the first rule it violated.
    """
    counter = tokenizer.count if tokenizer is not None else count_tokens
    banned = [phrase.lower() for phrase in config.banned_phrases]
    kept: list[QaPair] = []
    dropped: list[tuple[QaPair, str]] = []
    for pair in pairs:
        answer_lower = pair.answer.lower()
        if any(phrase in answer_lower for phrase in banned):
            dropped.append((pair, REASON_BANNED))
        elif len(pair.answer) < config.min_answer_chars:
            dropped.append((pair, REASON_TOO_SHORT))
        elif counter(pair.answer) > config.max_answer_tokens:
            dropped.append((pair, REASON_TOKEN_LIMIT))
        else:
            kept.append(pair)
    return kept, dropped


def entailment_screen(
    pairs: Sequence[QaPair],
    nli,
    config: CurationConfig,
) -> list[EntailmentJudgment]:
    """Score each answer (premise, chunked) against its question (hypothesis).

    Chunk scores live on a 0-100 scale; the aggregate is the max over chunks;
    the verdict follows the threshold +/- review band. Provider failures are
    recorded as Fail with the error message.
    """
    judgments: list[EntailmentJudgment] = []
    for pair in pairs:
        chunks = chunk_text(pair.answer, config.chunk_tokens) or [pair.answer]
        try:
            scores = [100.0 * float(nli.entail_probability(chunk, pair.question)) for chunk in chunks]
        except Exception as exc:
            judgments.append(
                EntailmentJudgment(pair.qa_id, [0.0], 0.0, Verdict.FAIL, message=f"provider failure: {exc}")
            )
            continue
        aggregate = max(scores)
        judgments.append(EntailmentJudgment(pair.qa_id, scores, aggregate, _verdict(aggregate, config)))
    return judgments


def _verdict(aggregate: float, config: CurationConfig) -> Verdict:
    if aggregate >= config.entailment_threshold + config.review_band:
        return Verdict.PASS
    if aggregate >= config.entailment_threshold - config.review_band:
        return Verdict.REVIEW
    return Verdict.FAIL


def retention_report(stage_counts: Sequence[int], reasons: dict[str, int] | None = None) -> RetentionReport:
    """Exact retention arithmetic over the four lifecycle counts."""
    if len(stage_counts) != 4:
        raise ValueError("stage_counts must be (input, after_dedup, after_rules, after_entailment)")
    for before, after in zip(stage_counts, stage_counts[1:]):
        if after > before:
            raise NonMonotoneCounts(f"count increased {before} -> {after}")
    input_count, after_dedup, after_rules, after_entailment = stage_counts
    rate = after_entailment / input_count if input_count else 0.0
    return RetentionReport(
        input_count=input_count,
        after_dedup=after_dedup,
        after_rules=after_rules,
        after_entailment=after_entailment,
        retention_rate=rate,
        per_reason=dict(reasons or {}),
    )
