"""Prompt construction, bounded-parallel QA generation, response parsing."""
from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .catalog import ContentType
from .curation import QaPair, QaStatus, QuestionKind
from .embedding import cosine
from .errors import DocumentEmpty, UnparseableResponse
from .extract import DocumentText, ThreadRecord

logger = logging.getLogger(__name__)

DEFAULT_CHAR_BUDGET = 24_000
DEFAULT_WORKERS = 12
TRUNCATION_MARKER = "\n[TRUNCATED]"

_TEMPLATE_FILES = {
    ContentType.PDF_MANUAL: "tool_pdf_manual.txt",
    ContentType.GITHUB_REPO: "tool_github_repo.txt",
    ContentType.GITHUB_README: "tool_github_readme.txt",
    ContentType.R_PACKAGE: "tool_r_package.txt",
    ContentType.PYTHON_PACKAGE: "tool_python_package.txt",
    ContentType.ARTICLE: "tool_article.txt",
    ContentType.WEBSITE: "tool_website.txt",
    ContentType.NOTEBOOK: "tool_notebook.txt",
}
_FORUM_TEMPLATE_FILES = {
    QuestionKind.FORUM_GENERAL: "forum_general.txt",
    QuestionKind.FORUM_TECHNICAL: "forum_technical.txt",
}


@dataclass
class PromptTemplate:
    content_type: ContentType
    question_kind: QuestionKind
    template_text: str
    target_pairs: int = 400  # advisory per-tool target, not enforced

    def __post_init__(self) -> None:
        for placeholder in ("{document}", "{topic}"):
            if self.template_text.count(placeholder) != 1:
                raise ValueError(f"template must contain {placeholder} exactly once")
        if self.target_pairs < 1:
            raise ValueError("target_pairs must be >= 1")


def load_default_templates() -> list[PromptTemplate]:
    """Eight per-content-type tool templates plus the two forum templates."""
    out: list[PromptTemplate] = []
    package = resources.files("qaforge.templates")
    for content_type, filename in _TEMPLATE_FILES.items():
        out.append(
            PromptTemplate(
                content_type=content_type,
                question_kind=QuestionKind.TOOL_GENERAL,
                template_text=(package / filename).read_text(),
            )
        )
    for kind, filename in _FORUM_TEMPLATE_FILES.items():
        out.append(
            PromptTemplate(
                content_type=ContentType.FORUM_THREAD,
                question_kind=kind,
                template_text=(package / filename).read_text(),
            )
        )
    return out


def build_prompt(
    template: PromptTemplate,
    doc: DocumentText | ThreadRecord,
    topic: str,
    char_budget: int = DEFAULT_CHAR_BUDGET,
) -> str:
    """Substitute the document (truncated to the budget) and topic."""
    text = doc.rendered() if isinstance(doc, ThreadRecord) else doc.text
    if not text.strip():
        raise DocumentEmpty(f"document {_doc_id(doc)} is empty")
    if len(text) > char_budget:
        text = text[: char_budget - len(TRUNCATION_MARKER)] + TRUNCATION_MARKER
    return template.template_text.replace("{document}", text).replace("{topic}", topic)


def _doc_id(doc: DocumentText | ThreadRecord) -> str:
    return doc.question_id if isinstance(doc, ThreadRecord) else doc.doc_id


def _group_id(doc: DocumentText | ThreadRecord) -> str:
    return _doc_id(doc)


def _source_id(doc: DocumentText | ThreadRecord, source_ids: Mapping[str, str] | None = None) -> str:
    if source_ids and _doc_id(doc) in source_ids:
        return source_ids[_doc_id(doc)]
    return doc.source_id if isinstance(doc, DocumentText) else doc.question_id


def _content_type(doc: DocumentText | ThreadRecord) -> ContentType:
    return doc.content_type if isinstance(doc, DocumentText) else ContentType.FORUM_THREAD


def _topic(doc: DocumentText | ThreadRecord, topics: Mapping[str, str] | None) -> str:
    doc_id = _doc_id(doc)
    if topics and doc_id in topics:
        return topics[doc_id]
    if isinstance(doc, ThreadRecord):
        return doc.title
    return doc.doc_id


@dataclass
class GenerationReport:
    requests: int
    valid_responses: int
    pairs_emitted: int
    mean_source_similarity: float | None = None

    @property
    def validity_rate(self) -> float | None:
        return self.valid_responses / self.requests if self.requests else None

    def to_dict(self) -> dict:
        return {
            "requests": self.requests,
            "valid_responses": self.valid_responses,
            "validity_rate": self.validity_rate,
            "pairs_emitted": self.pairs_emitted,
            "mean_source_similarity": self.mean_source_similarity,
        }


def generate_qa_batch(
    docs: Sequence[DocumentText | ThreadRecord],
    templates: Sequence[PromptTemplate],
    gateway,
    workers: int = DEFAULT_WORKERS,
    char_budget: int = DEFAULT_CHAR_BUDGET,
    topics: Mapping[str, str] | None = None,
    priorities: Mapping[str, int] | None = None,
    source_ids: Mapping[str, str] | None = None,
) -> tuple[list[QaPair], GenerationReport]:
    """One gateway request per (doc, applicable template); failures are counted,
    not fatal; output order is (doc id, kind) regardless of worker count."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    requests: list[tuple[str, QuestionKind, DocumentText | ThreadRecord, PromptTemplate]] = []
    for doc in docs:
        target_type = _content_type(doc)
        for template in templates:
            if template.content_type == target_type:
                requests.append((_doc_id(doc), template.question_kind, doc, template))
    requests.sort(key=lambda r: (r[0], r[1].value))

    def run_one(item):
        doc_id, kind, doc, template = item
        prompt = build_prompt(template, doc, _topic(doc, topics), char_budget)
        raw = gateway.complete(prompt)
        return parse_generation_response(raw)

    outcomes: list[list[tuple[str, str]] | Exception] = [None] * len(requests)  # type: ignore[list-item]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(run_one, item): idx for idx, item in enumerate(requests)}
        for future, idx in futures.items():
            try:
                outcomes[idx] = future.result()
            except Exception as exc:
                logger.warning("request %s failed: %s", requests[idx][0], exc)
                outcomes[idx] = exc

    pairs: list[QaPair] = []
    valid = 0
    for (doc_id, kind, doc, _template), outcome in zip(requests, outcomes):
        if isinstance(outcome, Exception):
            continue
        valid += 1
        source_id = _source_id(doc, source_ids)
        for i, (question, answer) in enumerate(outcome):
            pairs.append(
                QaPair(
                    qa_id=f"{doc_id}:{kind.value}:{i:03d}",
                    group_id=_group_id(doc),
                    question=question,
                    answer=answer,
                    question_kind=kind,
                    source_id=source_id,
                    content_type=_content_type(doc),
                    status=QaStatus.RAW,
                    source_priority=(priorities or {}).get(source_id, 0),
                )
            )
    report = GenerationReport(requests=len(requests), valid_responses=valid, pairs_emitted=len(pairs))
    return pairs, report


_FENCE_RE = re.compile(r"```[a-zA-Z]*\n(.*?)```", re.DOTALL)


def parse_generation_response(raw: str) -> list[tuple[str, str]]:
    """Extract the first JSON array of {question, answer} objects.

    Tolerates surrounding prose and code fences; entries missing either field
    (or blank after trimming) are dropped. Raises UnparseableResponse when no
    candidate array parses.
    """
    candidates = [m.group(1) for m in _FENCE_RE.finditer(raw)]
    candidates.append(raw)
    for text in candidates:
        for start in _array_starts(text):
            parsed = _try_parse_array(text, start)
            if parsed is not None:
                return _clean_entries(parsed)
    raise UnparseableResponse("no JSON array of question/answer objects found")


def _array_starts(text: str):
    return [m.start() for m in re.finditer(r"\[", text)]


def _try_parse_array(text: str, start: int):
    decoder = json.JSONDecoder()
    try:
        value, _ = decoder.raw_decode(text, start)
    except ValueError:
        return None
    if isinstance(value, list) and any(isinstance(e, dict) for e in value):
        return value
    return None


def _clean_entries(entries: list) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    for entry in entries:
        if not isinstance(entry, dict):
            continue
        question = entry.get("question")
        answer = entry.get("answer")
        if not isinstance(question, str) or not isinstance(answer, str):
            continue
        question, answer = question.strip(), answer.strip()
        if question and answer:
            out.append((question, answer))
    return out


def generation_report(
    pairs: Sequence[QaPair],
    requests: int,
    valid: int,
    embedder=None,
    source_texts: Mapping[str, str] | None = None,
) -> GenerationReport:
    """Summary statistics; with an embedder, adds mean answer-to-source cosine."""
    if valid > requests:
        raise ValueError("valid responses cannot exceed requests")
    similarity: float | None = None
    if embedder is not None and source_texts:
        sims = []
        for pair in pairs:
            source = source_texts.get(pair.group_id)
            if source is None:
                continue
            sims.append(
                cosine(
                    np.asarray(embedder.embed(pair.answer), dtype=float),
                    np.asarray(embedder.embed(source), dtype=float),
                )
            )
        if sims:
            similarity = float(np.mean(sims))
    return GenerationReport(
        requests=requests,
        valid_responses=valid,
        pairs_emitted=len(pairs),
        mean_source_similarity=similarity,
    )
