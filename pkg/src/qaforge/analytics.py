"""Exploratory statistics over thread corpora and generated datasets."""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .curation import QaPair
from .errors import InsufficientVocabulary, ZeroVariance
from .split import ClusterAssignment
from .textutil import lexical_tokens

VOTE_BUCKETS = ("0", "1-5", ">5")


@dataclass
class ZipfFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass
class EdaReport:
    tag_counts: dict[str, int]
    tag_cooccurrence: dict[tuple[str, str], int]
    vote_reply_pearson: float | None
    vote_buckets: dict[str, float]
    zipf: ZipfFit | None
    cluster_sizes: dict[int, int]
    cluster_top_terms: dict[int, list[str]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tag_counts": dict(self.tag_counts),
            "tag_cooccurrence": {f"{a}|{b}": n for (a, b), n in self.tag_cooccurrence.items()},
            "vote_reply_pearson": self.vote_reply_pearson,
            "vote_buckets": dict(self.vote_buckets),
            "zipf": None if self.zipf is None else vars(self.zipf),
            "cluster_sizes": {str(c): n for c, n in self.cluster_sizes.items()},
            "cluster_top_terms": {str(c): t for c, t in self.cluster_top_terms.items()},
        }


def tag_stats(threads: Sequence) -> tuple[dict[str, int], dict[tuple[str, str], int]]:
    """Tag frequencies plus per-thread unordered co-occurrence counts."""
    counts: Counter[str] = Counter()
    cooccurrence: Counter[tuple[str, str]] = Counter()
    for thread in threads:
        tags = sorted(set(t.lower() for t in thread.tags))
        counts.update(tags)
        for i, a in enumerate(tags):
            for b in tags[i + 1 :]:
                cooccurrence[(a, b)] += 1
    return dict(counts), dict(cooccurrence)


def engagement_correlation(threads: Sequence) -> float:
    """Pearson coefficient between vote counts and reply counts."""
    if len(threads) < 2:
        raise ZeroVariance("need at least 2 threads")
    votes = np.asarray([t.votes for t in threads], dtype=float)
    replies = np.asarray([t.reply_count for t in threads], dtype=float)
    if float(votes.std()) == 0.0 or float(replies.std()) == 0.0:
        raise ZeroVariance("votes or replies have zero variance")
    vc = votes - votes.mean()
    rc = replies - replies.mean()
    return float((vc * rc).sum() / math.sqrt((vc * vc).sum() * (rc * rc).sum()))


def vote_bucket_fractions(threads: Sequence) -> dict[str, float]:
    if not threads:
        return {b: 0.0 for b in VOTE_BUCKETS}
    tally = {b: 0 for b in VOTE_BUCKETS}
    for thread in threads:
        if thread.votes == 0:
            tally["0"] += 1
        elif thread.votes <= 5:
            tally["1-5"] += 1
        else:
            tally[">5"] += 1
    return {b: n / len(threads) for b, n in tally.items()}


def zipf_fit(texts: Sequence[str], min_frequency: int = 2, min_types: int = 10) -> ZipfFit:
    """Least-squares fit of ln(frequency) against ln(rank).

    Only types with frequency >= min_frequency enter the fit; frequency-tied
    types get consecutive ranks in lexicographic order.
    """
    counts: Counter[str] = Counter()
    for text in texts:
        counts.update(lexical_tokens(text))
    frequencies = sorted(
        (n for n in counts.values() if n >= min_frequency),
        reverse=True,
    )
    if len(frequencies) < min_types:
        raise InsufficientVocabulary(
            f"only {len(frequencies)} types with frequency >= {min_frequency}; need {min_types}"
        )
    x = np.log(np.arange(1, len(frequencies) + 1, dtype=float))
    y = np.log(np.asarray(frequencies, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    predicted = slope * x + intercept
    ss_res = float(((y - predicted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return ZipfFit(slope=float(slope), intercept=float(intercept), r_squared=max(0.0, min(1.0, r_squared)))


def cluster_summary(
    assignments: Sequence[ClusterAssignment],
    pairs: Sequence[QaPair],
    top_n: int = 5,
) -> tuple[dict[int, int], dict[int, list[str]]]:
    """Cluster sizes over the surviving pairs plus top TF-IDF terms per cluster."""
    pair_ids = {p.qa_id: p for p in pairs}
    cluster_of = {a.qa_id: a.cluster for a in assignments}
    sizes = {a.cluster: 0 for a in assignments}
    docs: dict[int, list[str]] = defaultdict(list)
    for qa_id, cluster in cluster_of.items():
        pair = pair_ids.get(qa_id)
        if pair is None:
            continue
        sizes[cluster] += 1
        docs[cluster].append(pair.question)
    top_terms = _top_tfidf_terms(docs, top_n)
    return sizes, top_terms


def _top_tfidf_terms(docs: Mapping[int, list[str]], top_n: int) -> dict[int, list[str]]:
    # one fitted document per cluster, weighting as in the metrics module
    cluster_tokens = {c: lexical_tokens(" ".join(texts)) for c, texts in docs.items()}
    n_docs = len(cluster_tokens)
    if n_docs == 0:
        return {}
    df: Counter[str] = Counter()
    for tokens in cluster_tokens.values():
        df.update(set(tokens))
    idf = {t: 1.0 + math.log((1 + n_docs) / (1 + d)) for t, d in df.items()}
    out: dict[int, list[str]] = {}
    for cluster, tokens in cluster_tokens.items():
        weights = {t: n * idf[t] for t, n in Counter(tokens).items()}
        ranked = sorted(weights.items(), key=lambda kv: (-kv[1], kv[0]))
        out[cluster] = [t for t, _ in ranked[:top_n]]
    return out


def build_eda_report(
    threads: Sequence,
    texts: Sequence[str] | None = None,
    assignments: Sequence[ClusterAssignment] | None = None,
    pairs: Sequence[QaPair] | None = None,
) -> EdaReport:
    counts, cooccurrence = tag_stats(threads)
    try:
        pearson = engagement_correlation(threads)
    except ZeroVariance:
        pearson = None
    zipf: ZipfFit | None
    try:
        zipf = zipf_fit(texts) if texts else None
    except InsufficientVocabulary:
        zipf = None
    sizes: dict[int, int] = {}
    top_terms: dict[int, list[str]] = {}
    if assignments and pairs is not None:
        sizes, top_terms = cluster_summary(assignments, pairs)
    return EdaReport(
        tag_counts=counts,
        tag_cooccurrence=cooccurrence,
        vote_reply_pearson=pearson,
        vote_buckets=vote_bucket_fractions(threads),
        zipf=zipf,
        cluster_sizes=sizes,
        cluster_top_terms=top_terms,
    )
