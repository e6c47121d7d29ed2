"""Reference-vs-candidate evaluation suite and run comparison tables.

Covers the full metric battery used to score model outputs: exact match,
Levenshtein, Jaccard, per-run TF-IDF cosine, ROUGE-1/2/L, BLEU-1/4, METEOR
(exact-match stage), provider-backed embedding cosines, word mover's
similarity, entailment, greedy token-embedding F1, and code keyword matching.
Aggregation, best-baseline gain/loss tables, and a paired-bootstrap
significance test live here too.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import (
    EmptyTokens,
    LengthMismatch,
    MetricSetMismatch,
    NoEmbeddableTokens,
)
from .textutil import chunk_text, collapse_whitespace, lexical_tokens

logger = logging.getLogger(__name__)

CORE_METRICS = [
    "exact_match",
    "levenshtein_similarity",
    "jaccard_similarity",
    "tfidf_cosine",
    "rouge_1",
    "rouge_2",
    "rouge_l",
    "bleu_1",
    "bleu_4",
    "meteor",
    "spacy_similarity",
    "sbert_similarity",
    "wmd_similarity",
    "entailment_score",
]
EXTRA_METRICS = ["bertscore_f1", "codebert_f1", "code_keyword_match"]


@dataclass
class EvalExample:
    qa_id: str
    question: str
    reference: str
    candidate: str

    def __post_init__(self) -> None:
        if not self.reference:
            raise ValueError(f"reference empty for {self.qa_id}")


# ---------------------------------------------------------------------------
# Lexical kernels
# ---------------------------------------------------------------------------

def exact_match(ref: str, cand: str) -> float:
    """1 iff equal after trimming and collapsing internal whitespace (case kept)."""
    return 1.0 if collapse_whitespace(ref) == collapse_whitespace(cand) else 0.0


def levenshtein_similarity(ref: str, cand: str) -> float:
    a, b = ref.strip(), cand.strip()
    if not a and not b:
        return 1.0
    return 1.0 - _edit_distance(a, b) / max(len(a), len(b))


def _edit_distance(a: str, b: str) -> int:
    # two-row DP; the test oracle keeps the full matrix
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def jaccard_similarity(ref: str, cand: str) -> float:
    sa, sb = set(lexical_tokens(ref)), set(lexical_tokens(cand))
    if not sa and not sb:
        return 1.0
    union = sa | sb
    return len(sa & sb) / len(union)


def tfidf_cosine(examples: Sequence[EvalExample]) -> dict[str, float]:
    """Per-pair cosine under TF-IDF fitted over all references and candidates.

    Weight = tf * (1 + ln((1 + N) / (1 + df))) with N the fitted document
    count. Fitting per run (not per pair) keeps shared terms informative.
    """
    if not examples:
        raise ValueError("tfidf_cosine needs a non-empty run")
    docs = [lexical_tokens(e.reference) for e in examples] + [lexical_tokens(e.candidate) for e in examples]
    n_docs = len(docs)
    df: Counter[str] = Counter()
    for tokens in docs:
        df.update(set(tokens))
    idf = {t: 1.0 + math.log((1 + n_docs) / (1 + d)) for t, d in df.items()}

    def weight_vec(tokens: list[str]) -> dict[str, float]:
        return {t: c * idf[t] for t, c in Counter(tokens).items()}

    out: dict[str, float] = {}
    for idx, example in enumerate(examples):
        wa = weight_vec(docs[idx])
        wb = weight_vec(docs[len(examples) + idx])
        out[example.qa_id] = _sparse_cosine(wa, wb)
    return out


def _sparse_cosine(a: dict[str, float], b: dict[str, float]) -> float:
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    dot = sum(v * b[t] for t, v in a.items() if t in b)
    return dot / (na * nb)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def rouge_scores(ref: str, cand: str) -> tuple[float, float, float]:
    """(ROUGE-1 F1, ROUGE-2 F1, ROUGE-L F1) with clipped n-gram counts."""
    rt, ct = lexical_tokens(ref), lexical_tokens(cand)
    if not rt or not ct:
        return (0.0, 0.0, 0.0)
    scores = []
    for n in (1, 2):
        rg, cg = _ngrams(rt, n), _ngrams(ct, n)
        overlap = sum(min(c, rg[g]) for g, c in cg.items() if g in rg)
        total_r, total_c = sum(rg.values()), sum(cg.values())
        if total_r == 0 or total_c == 0:
            scores.append(0.0)
            continue
        scores.append(_f1(overlap / total_c, overlap / total_r))
    lcs = _lcs_length(rt, ct)
    scores.append(_f1(lcs / len(ct), lcs / len(rt)))
    return (scores[0], scores[1], scores[2])


def _lcs_length(a: list[str], b: list[str]) -> int:
    previous = [0] * (len(b) + 1)
    for ca in a:
        current = [0]
        for j, cb in enumerate(b, start=1):
            current.append(previous[j - 1] + 1 if ca == cb else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def bleu_scores(ref: str, cand: str) -> tuple[float, float]:
    """(BLEU-1, BLEU-4) with brevity penalty and add-one smoothing.

    Smoothing (m+1)/(t+1) applies only for n >= 2 when the clipped match
    count is zero; a zero unigram precision zeroes both scores.
    """
    rt, ct = lexical_tokens(ref), lexical_tokens(cand)
    if not ct:
        return (0.0, 0.0)
    bp = 1.0 if len(ct) >= len(rt) else math.exp(1.0 - len(rt) / len(ct))
    precisions = []
    for n in range(1, 5):
        rg, cg = _ngrams(rt, n), _ngrams(ct, n)
        matched = sum(min(c, rg[g]) for g, c in cg.items() if g in rg)
        total = sum(cg.values())
        if n == 1:
            precisions.append(matched / total if total else 0.0)
        elif matched == 0:
            precisions.append((matched + 1) / (total + 1))
        else:
            precisions.append(matched / total)
    bleu1 = bp * precisions[0]
    if precisions[0] == 0.0:
        return (0.0, 0.0)
    log_mean = sum(math.log(p) for p in precisions) / 4.0
    return (bleu1, bp * math.exp(log_mean))


def meteor_score(ref: str, cand: str) -> float:
    """Exact-match alignment stage with the classic parameterization.

    Fmean = 10PR/(R+9P), penalty = 0.5*(chunks/matches)^3. Alignment is
    leftmost-greedy over candidate positions, not the global chunk-minimizing
    search of tool METEOR.
    """
    rt, ct = lexical_tokens(ref), lexical_tokens(cand)
    if not rt or not ct:
        return 0.0
    used = [False] * len(rt)
    alignment: list[tuple[int, int]] = []  # (candidate pos, reference pos)
    for ci, token in enumerate(ct):
        for ri, rtoken in enumerate(rt):
            if not used[ri] and rtoken == token:
                used[ri] = True
                alignment.append((ci, ri))
                break
    matches = len(alignment)
    if matches == 0:
        return 0.0
    precision = matches / len(ct)
    recall = matches / len(rt)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    chunks = 1
    for (pc, pr), (cc, cr) in zip(alignment, alignment[1:]):
        if cc != pc + 1 or cr != pr + 1:
            chunks += 1
    penalty = 0.5 * (chunks / matches) ** 3
    return fmean * (1.0 - penalty)


# ---------------------------------------------------------------------------
# Provider-backed kernels
# ---------------------------------------------------------------------------

def embedding_similarity(ref: str, cand: str, embedder) -> float:
    from .embedding import cosine

    return cosine(np.asarray(embedder.embed(ref), dtype=float), np.asarray(embedder.embed(cand), dtype=float))


def _nbow(text: str, token_embedder) -> tuple[list[str], np.ndarray, np.ndarray]:
    counts = Counter(lexical_tokens(text))
    tokens, vectors, weights = [], [], []
    for token, count in sorted(counts.items()):
        vec = token_embedder.embed_token(token)
        if vec is None:
            continue
        tokens.append(token)
        vectors.append(np.asarray(vec, dtype=float))
        weights.append(float(count))
    if not tokens:
        raise NoEmbeddableTokens(f"no embeddable tokens in {text!r}")
    w = np.asarray(weights)
    return tokens, np.vstack(vectors), w / w.sum()


def transport_distance(supply: np.ndarray, demand: np.ndarray, cost: np.ndarray) -> float:
    """Exact minimum-cost transport via LP (HiGHS); desk-scale vocabularies."""
    m, n = cost.shape
    c = cost.reshape(-1)
    a_eq = np.zeros((m + n - 1, m * n))
    b_eq = np.zeros(m + n - 1)
    for i in range(m):
        a_eq[i, i * n : (i + 1) * n] = 1.0
        b_eq[i] = supply[i]
    for j in range(n - 1):  # last column constraint is redundant
        a_eq[m + j, j::n] = 1.0
        b_eq[m + j] = demand[j]
    result = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not result.success:
        raise RuntimeError(f"transport solve failed: {result.message}")
    return max(0.0, float(result.fun))


def wmd_similarity(ref: str, cand: str, token_embedder) -> float:
    """1 / (1 + earth-mover distance) between normalized bags of words."""
    ref_tokens, ref_vecs, ref_w = _nbow(ref, token_embedder)
    cand_tokens, cand_vecs, cand_w = _nbow(cand, token_embedder)
    if ref_tokens == cand_tokens and np.allclose(ref_w, cand_w):
        return 1.0
    cost = np.linalg.norm(ref_vecs[:, None, :] - cand_vecs[None, :, :], axis=2)
    distance = transport_distance(ref_w, cand_w, cost)
    return 1.0 / (1.0 + distance)


def entailment_metric(ref: str, cand: str, nli, chunk_tokens: int = 384) -> float:
    """Entailment probability, premise (reference) chunked and max-aggregated."""
    if not cand.strip():
        return 0.0
    chunks = chunk_text(ref, chunk_tokens) or [ref]
    return max(float(nli.entail_probability(chunk, cand)) for chunk in chunks)


def greedy_embedding_f1(ref: str, cand: str, token_embedder) -> float:
    """Greedy max-cosine token matching F1 (BERTScore-style, provider-backed)."""
    try:
        _, ref_vecs, _ = _nbow(ref, token_embedder)
        _, cand_vecs, _ = _nbow(cand, token_embedder)
    except NoEmbeddableTokens as exc:
        raise EmptyTokens(str(exc)) from exc
    ref_unit = ref_vecs / np.linalg.norm(ref_vecs, axis=1, keepdims=True)
    cand_unit = cand_vecs / np.linalg.norm(cand_vecs, axis=1, keepdims=True)
    sims = np.clip(cand_unit @ ref_unit.T, 0.0, None)
    precision = float(sims.max(axis=1).mean())
    recall = float(sims.max(axis=0).mean())
    return _f1(precision, recall)


# ---------------------------------------------------------------------------
# Code keyword matching
# ---------------------------------------------------------------------------

_BACKTICK_RE = re.compile(r"`([^`]+)`")
_FLAG_RE = re.compile(r"(?<!\w)(--?[A-Za-z][\w-]*)")
_PATHLIKE_RE = re.compile(r"(?<!\S)(\S*/\S+|[\w.-]+\.[A-Za-z0-9]{1,5})(?=[\s,;:)]|$)")
_SNAKE_RE = re.compile(r"\b[a-z0-9]+(?:_[a-z0-9]+)+\b")
_CAMEL_RE = re.compile(r"\b[a-z]+(?:[A-Z][a-z0-9]+)+\b")


def extract_code_keywords(text: str) -> set[str]:
    keywords: set[str] = set()
    for match in _BACKTICK_RE.findall(text):
        keywords.add(match.strip())
    keywords.update(_FLAG_RE.findall(text))
    keywords.update(_PATHLIKE_RE.findall(text))
    keywords.update(_SNAKE_RE.findall(text))
    keywords.update(_CAMEL_RE.findall(text))
    return {k for k in keywords if k}


def code_keyword_match(ref: str, cand: str) -> float | None:
    """Fraction of reference code keywords present in the candidate.

    Returns None (undefined, excluded from aggregates) when the reference
    yields no keywords.
    """
    keywords = extract_code_keywords(ref)
    if not keywords:
        return None
    hit = sum(1 for k in keywords if k in cand)
    return hit / len(keywords)


# ---------------------------------------------------------------------------
# Run evaluation and comparison
# ---------------------------------------------------------------------------

@dataclass
class MetricProviders:
    """Optional provider bundle; metrics without a provider are omitted."""

    sbert: object | None = None
    spacy: object | None = None
    token_embedder: object | None = None
    nli: object | None = None
    bert_tokens: object | None = None
    code_tokens: object | None = None
    chunk_tokens: int = 384


@dataclass
class MetricReport:
    run_id: str
    per_example: dict[str, dict[str, float | None]]
    aggregate: dict[str, float]
    defined_counts: dict[str, int]
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_aggregates(cls, run_id: str, aggregate: dict[str, float]) -> "MetricReport":
        return cls(run_id=run_id, per_example={}, aggregate=dict(aggregate),
                   defined_counts={m: 0 for m in aggregate})

    def to_json(self) -> str:
        return json.dumps(
            {
                "run_id": self.run_id,
                "aggregate": self.aggregate,
                "defined_counts": self.defined_counts,
                "per_example": self.per_example,
                "metadata": self.metadata,
            },
            sort_keys=True,
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        raw = json.loads(text)
        return cls(
            run_id=raw["run_id"],
            per_example=raw.get("per_example", {}),
            aggregate=raw["aggregate"],
            defined_counts=raw.get("defined_counts", {}),
            metadata=raw.get("metadata", {}),
        )

    def write_per_example_csv(self, path: Path) -> None:
        metric_names = sorted(self.aggregate)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["qa_id", *metric_names])
            for qa_id in sorted(self.per_example):
                row = self.per_example[qa_id]
                writer.writerow([qa_id] + ["" if row.get(m) is None else f"{row[m]:.6f}" for m in metric_names])


def _aggregate(per_example: dict[str, dict[str, float | None]]) -> tuple[dict[str, float], dict[str, int]]:
    metrics: set[str] = set()
    for row in per_example.values():
        metrics.update(row)
    aggregate: dict[str, float] = {}
    counts: dict[str, int] = {}
    for metric in metrics:
        values = [row[metric] for row in per_example.values() if row.get(metric) is not None]
        counts[metric] = len(values)
        aggregate[metric] = float(np.mean(values)) if values else 0.0
    return aggregate, counts


def evaluate_run(run_id: str, examples: Sequence[EvalExample], providers: MetricProviders | None = None) -> MetricReport:
    """Score every example on every computable metric and aggregate the means."""
    if not examples:
        raise ValueError("evaluate_run needs at least one example")
    providers = providers or MetricProviders()
    tfidf = tfidf_cosine(examples)
    per_example: dict[str, dict[str, float | None]] = {}
    for example in examples:
        ref, cand = example.reference, example.candidate
        row: dict[str, float | None] = {
            "exact_match": exact_match(ref, cand),
            "levenshtein_similarity": levenshtein_similarity(ref, cand),
            "jaccard_similarity": jaccard_similarity(ref, cand),
            "tfidf_cosine": tfidf[example.qa_id],
        }
        row["rouge_1"], row["rouge_2"], row["rouge_l"] = rouge_scores(ref, cand)
        row["bleu_1"], row["bleu_4"] = bleu_scores(ref, cand)
        row["meteor"] = meteor_score(ref, cand)
        row["code_keyword_match"] = code_keyword_match(ref, cand)
        _apply_provider_metric(row, "sbert_similarity", providers.sbert, lambda p: embedding_similarity(ref, cand, p), example.qa_id)
        _apply_provider_metric(row, "spacy_similarity", providers.spacy, lambda p: embedding_similarity(ref, cand, p), example.qa_id)
        _apply_provider_metric(row, "wmd_similarity", providers.token_embedder, lambda p: wmd_similarity(ref, cand, p), example.qa_id)
        _apply_provider_metric(row, "entailment_score", providers.nli, lambda p: entailment_metric(ref, cand, p, providers.chunk_tokens), example.qa_id)
        _apply_provider_metric(row, "bertscore_f1", providers.bert_tokens, lambda p: greedy_embedding_f1(ref, cand, p), example.qa_id)
        _apply_provider_metric(row, "codebert_f1", providers.code_tokens, lambda p: greedy_embedding_f1(ref, cand, p), example.qa_id)
        per_example[example.qa_id] = row
    aggregate, counts = _aggregate(per_example)
    return MetricReport(run_id=run_id, per_example=per_example, aggregate=aggregate, defined_counts=counts)


def _apply_provider_metric(row: dict, name: str, provider, compute, qa_id: str) -> None:
    if provider is None:
        return
    try:
        row[name] = float(compute(provider))
    except Exception as exc:
        logger.warning("%s undefined for %s: %s", name, qa_id, exc)
        row[name] = None


@dataclass
class ComparisonTable:
    baseline_best: dict[str, tuple[float, str]]
    model_rows: dict[str, dict[str, float]]
    gains: dict[str, dict[str, float]]
    p_values: dict[str, dict[str, float | None]]
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path: Path, metric_order: Sequence[str] | None = None) -> None:
        metrics = list(metric_order or sorted(self.baseline_best))
        models = list(self.model_rows)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            header = ["metric", "best_baseline", "best_baseline_model"]
            header += models
            header += [f"{m} G/L" for m in models]
            writer.writerow(header)
            for metric in metrics:
                value, source = self.baseline_best[metric]
                row = [metric, f"{value:.4f}", source]
                row += [f"{self.model_rows[m][metric]:.4f}" for m in models]
                row += [f"{self.gains[m][metric]:+.4f}" for m in models]
                writer.writerow(row)


def compare_runs(
    baselines: Sequence[MetricReport],
    models: Sequence[MetricReport],
    resamples: int = 10_000,
    seed: int = 0,
) -> ComparisonTable:
    """Best-baseline table with per-model gains and bootstrap p-values."""
    if not baselines or not models:
        raise ValueError("compare_runs needs at least one baseline and one model report")
    metric_set = set(baselines[0].aggregate)
    for report in list(baselines) + list(models):
        if set(report.aggregate) != metric_set:
            raise MetricSetMismatch(
                f"{report.run_id} metrics {sorted(set(report.aggregate) ^ metric_set)} differ from first baseline"
            )
    baseline_best: dict[str, tuple[float, str]] = {}
    for metric in metric_set:
        best = max(baselines, key=lambda r: r.aggregate[metric])
        baseline_best[metric] = (best.aggregate[metric], best.run_id)
    model_rows = {r.run_id: dict(r.aggregate) for r in models}
    gains = {
        run_id: {m: row[m] - baseline_best[m][0] for m in metric_set} for run_id, row in model_rows.items()
    }
    by_run = {r.run_id: r for r in baselines}
    p_values: dict[str, dict[str, float | None]] = {}
    for model in models:
        row: dict[str, float | None] = {}
        for metric in metric_set:
            best_report = by_run[baseline_best[metric][1]]
            row[metric] = _paired_p(best_report, model, metric, resamples, seed)
        p_values[model.run_id] = row
    return ComparisonTable(
        baseline_best=baseline_best,
        model_rows=model_rows,
        gains=gains,
        p_values=p_values,
        metadata={"significance": "paired bootstrap", "resamples": resamples, "seed": seed},
    )


def _paired_p(baseline: MetricReport, model: MetricReport, metric: str, resamples: int, seed: int) -> float | None:
    shared = [
        qa_id
        for qa_id in sorted(baseline.per_example)
        if qa_id in model.per_example
        and baseline.per_example[qa_id].get(metric) is not None
        and model.per_example[qa_id].get(metric) is not None
    ]
    if len(shared) < 2:
        return None
    base_vals = [baseline.per_example[q][metric] for q in shared]
    model_vals = [model.per_example[q][metric] for q in shared]
    return significance_test(base_vals, model_vals, resamples=resamples, seed=seed)


def significance_test(
    baseline_per_example: Sequence[float],
    model_per_example: Sequence[float],
    resamples: int = 10_000,
    seed: int = 0,
) -> float:
    """Two-sided paired-bootstrap p-value for mean(model - baseline) != 0."""
    if len(baseline_per_example) != len(model_per_example):
        raise LengthMismatch(
            f"baseline has {len(baseline_per_example)} values, model has {len(model_per_example)}"
        )
    if len(baseline_per_example) < 2:
        raise LengthMismatch("need at least 2 paired values")
    deltas = np.asarray(model_per_example, dtype=float) - np.asarray(baseline_per_example, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(deltas), size=(resamples, len(deltas)))
    means = deltas[idx].mean(axis=1)
    p_le = (np.count_nonzero(means <= 0.0) + 1) / (resamples + 1)
    p_ge = (np.count_nonzero(means >= 0.0) + 1) / (resamples + 1)
    return min(1.0, 2.0 * min(p_le, p_ge))
