"""Shared tokenization, normalization, and chunking helpers.

Every lexical metric and curation rule tokenizes through this module so the
whole pipeline agrees on what a "token" is.
"""
from __future__ import annotations

import re

_LEXICAL_TOKEN_RE = re.compile(r"[a-z0-9]+")
_COUNT_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_WS_RE = re.compile(r"\s+")


def lexical_tokens(text: str) -> list[str]:
    """Lowercase alphanumeric tokens; the vocabulary unit for overlap metrics."""
    return _LEXICAL_TOKEN_RE.findall(text.lower())


def count_tokens(text: str) -> int:
    """Whitespace-plus-punctuation token count (compatibility bound, not semantic)."""
    return len(_COUNT_TOKEN_RE.findall(text))


def collapse_whitespace(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


def normalize_for_dedup(text: str) -> str:
    """Trim, collapse whitespace, casefold; the exact-dedup comparison key."""
    return collapse_whitespace(text).casefold()


def split_paragraphs(text: str) -> list[str]:
    parts = re.split(r"\n\s*\n", text)
    return [p.strip() for p in parts if p.strip()]


def chunk_text(text: str, max_tokens: int, counter=count_tokens) -> list[str]:
    """Split on paragraph boundaries into chunks of at most max_tokens tokens.

    Consecutive paragraphs are packed greedily; a single paragraph longer than
    the budget is split on token windows. Deterministic for a given counter.
    """
    if counter(text) <= max_tokens:
        return [text.strip()] if text.strip() else []
    chunks: list[str] = []
    current: list[str] = []
    current_tokens = 0
    for para in split_paragraphs(text):
        n = counter(para)
        if n > max_tokens:
            if current:
                chunks.append("\n\n".join(current))
                current, current_tokens = [], 0
            chunks.extend(_split_oversize(para, max_tokens))
            continue
        if current and current_tokens + n > max_tokens:
            chunks.append("\n\n".join(current))
            current, current_tokens = [], 0
        current.append(para)
        current_tokens += n
    if current:
        chunks.append("\n\n".join(current))
    return chunks


def _split_oversize(paragraph: str, max_tokens: int) -> list[str]:
    out: list[str] = []
    piece: list[str] = []
    piece_tokens = 0
    for word in paragraph.split():
        n = count_tokens(word)
        if piece and piece_tokens + n > max_tokens:
            out.append(" ".join(piece))
            piece, piece_tokens = [], 0
        piece.append(word)
        piece_tokens += n
    if piece:
        out.append(" ".join(piece))
    return out
