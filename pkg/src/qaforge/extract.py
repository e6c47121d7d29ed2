"""Raw payloads to normalized plain-text documents.

PDF text arrives through a converter provider and is normalized here; HTML
becomes Markdown via a lenient stdlib-parser walk; notebooks, R documentation,
and source trees are consolidated; forum captures become ThreadRecords with
OCR-hooked figure handling.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable, Sequence

from .catalog import ContentType
from .errors import (
    AllFilesUnreadable,
    ConverterUnavailable,
    EmptyExtraction,
    MalformedNotebook,
    MissingTitle,
    NoMatchingFiles,
)

logger = logging.getLogger(__name__)

ROLE_AUTHOR = "author"
ROLE_REPLIER = "replier"

_MD_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*\S)\s*$")
_ALL_CAPS_RE = re.compile(r"^[A-Z0-9][A-Z0-9 \t\-_.:()/]*$")


@dataclass
class DocumentText:
    doc_id: str
    source_id: str
    content_type: ContentType
    text: str
    section_map: list[tuple[str, int]] = field(default_factory=list)

    @property
    def char_count(self) -> int:
        return len(self.text)

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "source_id": self.source_id,
            "content_type": self.content_type.value,
            "text": self.text,
            "char_count": self.char_count,
            "section_map": [[h, o] for h, o in self.section_map],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "DocumentText":
        return cls(
            doc_id=raw["doc_id"],
            source_id=raw["source_id"],
            content_type=ContentType(raw["content_type"]),
            text=raw["text"],
            section_map=[(h, int(o)) for h, o in raw.get("section_map", [])],
        )


@dataclass
class ThreadRecord:
    question_id: str
    title: str
    body: str
    replies: list[tuple[str, str]]
    votes: int = 0
    views: int = 0
    tags: list[str] = field(default_factory=list)
    updated_at: str = ""

    @property
    def reply_count(self) -> int:
        return len(self.replies)

    def rendered(self) -> str:
        """Plain-text rendering used as the generation document."""
        parts = [f"# {self.title}", "", self.body.strip()]
        for role, text in self.replies:
            parts += ["", f"[{role}] {text.strip()}"]
        return "\n".join(parts).strip()

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "title": self.title,
            "body": self.body,
            "replies": [[r, t] for r, t in self.replies],
            "votes": self.votes,
            "reply_count": self.reply_count,
            "views": self.views,
            "tags": self.tags,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ThreadRecord":
        return cls(
            question_id=raw["question_id"],
            title=raw["title"],
            body=raw["body"],
            replies=[(r, t) for r, t in raw.get("replies", [])],
            votes=raw.get("votes", 0),
            views=raw.get("views", 0),
            tags=list(raw.get("tags", [])),
            updated_at=raw.get("updated_at", ""),
        )


# ---------------------------------------------------------------------------
# Section detection
# ---------------------------------------------------------------------------

def build_section_map(text: str) -> list[tuple[str, int]]:
    """Detected headings with their byte offsets into the UTF-8 text.

    The first non-empty line always counts as the document title; later lines
    qualify as Markdown headings or short ALL-CAPS lines.
    """
    sections: list[tuple[str, int]] = []
    offset = 0
    saw_first = False
    for line in text.split("\n"):
        stripped = line.strip()
        if stripped:
            heading = _heading_text(stripped, is_first=not saw_first)
            if heading is not None:
                sections.append((heading, offset))
            saw_first = True
        offset += len(line.encode("utf-8")) + 1
    return sections


def _heading_text(line: str, is_first: bool) -> str | None:
    md = _MD_HEADING_RE.match(line)
    if md:
        return md.group(2)
    if len(line) <= 60 and any(c.isalpha() for c in line) and _ALL_CAPS_RE.match(line):
        return line
    if is_first:
        return line
    return None


# ---------------------------------------------------------------------------
# PDF text
# ---------------------------------------------------------------------------

def extract_pdf_text(
    payload: Path | str,
    converter,
    doc_id: str | None = None,
    source_id: str = "",
) -> DocumentText:
    """Run the converter and normalize: form feeds become section breaks,
    horizontal whitespace collapses, blank-line runs shrink to one."""
    payload = Path(payload)
    if converter is None:
        raise ConverterUnavailable("no PDF text provider configured")
    if not payload.exists():
        raise FileNotFoundError(payload)
    try:
        raw = converter.extract_text(payload)
    except Exception as exc:
        raise ConverterUnavailable(f"converter failed on {payload}: {exc}") from exc
    text = _normalize_pdf_text(raw)
    if not text:
        raise EmptyExtraction(f"{payload}: converter produced no printable characters")
    return DocumentText(
        doc_id=doc_id or payload.stem,
        source_id=source_id,
        content_type=ContentType.PDF_MANUAL,
        text=text,
        section_map=build_section_map(text),
    )


def _normalize_pdf_text(raw: str) -> str:
    text = raw.replace("\f", "\n\n")
    text = re.sub(r"[ \t]+", " ", text)
    text = "\n".join(line.strip() for line in text.split("\n"))
    text = re.sub(r"\n{3,}", "\n\n", text)
    return text.strip()


# ---------------------------------------------------------------------------
# HTML to Markdown
# ---------------------------------------------------------------------------

_BLOCK_TAGS = {"p", "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "li", "pre", "table", "tr"}

ImageHandler = Callable[[str, str], str]


class _MarkdownBuilder(HTMLParser):
    def __init__(self, image_handler: ImageHandler | None = None):
        super().__init__(convert_charrefs=True)
        self.blocks: list[str] = []
        self.inline: list[str] = []
        self.list_stack: list[dict] = []
        self.pre_depth = 0
        self.skip_depth = 0
        self.href_stack: list[str] = []
        self.emph_stack: list[str] = []
        self.table_rows: list[list[str]] = []
        self.cell: list[str] | None = None
        self.in_table = False
        self.image_handler = image_handler

    # -- helpers ----------------------------------------------------------
    def _flush_inline(self, prefix: str = "") -> None:
        text = "".join(self.inline)
        self.inline = []
        if self.pre_depth == 0:
            text = re.sub(r"\s+", " ", text).strip()
        if text:
            self.blocks.append(prefix + text)

    def _emit_text(self, text: str) -> None:
        if self.cell is not None:
            self.cell.append(text)
        else:
            self.inline.append(text)

    # -- parser hooks ------------------------------------------------------
    def handle_starttag(self, tag, attrs):
        if tag in ("script", "style"):
            self.skip_depth += 1
            return
        if self.skip_depth:
            return
        attrs_map = dict(attrs)
        if tag == "br":
            self._emit_text("\n")
        elif tag in ("strong", "b"):
            self._emit_text("**")
            self.emph_stack.append("**")
        elif tag in ("em", "i"):
            self._emit_text("*")
            self.emph_stack.append("*")
        elif tag == "a":
            self.href_stack.append(attrs_map.get("href", ""))
            self._emit_text("[")
        elif tag == "img":
            src = attrs_map.get("src", "")
            alt = attrs_map.get("alt", "")
            if self.image_handler is not None:
                self._emit_text(self.image_handler(src, alt))
            elif alt:
                self._emit_text(alt)
        elif tag == "pre":
            self._flush_inline()
            self.pre_depth += 1
        elif tag == "code":
            if self.pre_depth == 0:
                self._emit_text("`")
        elif tag in ("ul", "ol"):
            self._flush_inline()
            self.list_stack.append({"ordered": tag == "ol", "index": 0})
        elif tag == "li":
            self.inline = []
        elif tag == "table":
            self.in_table = True
            self.table_rows = []
        elif tag == "tr":
            self.table_rows.append([])
        elif tag in ("td", "th"):
            self.cell = []
        elif tag in ("p", "h1", "h2", "h3", "h4", "h5", "h6"):
            self._flush_inline()

    def handle_endtag(self, tag):
        if tag in ("script", "style"):
            self.skip_depth = max(0, self.skip_depth - 1)
            return
        if self.skip_depth:
            return
        if tag in ("strong", "b", "em", "i"):
            if self.emph_stack:
                self._emit_text(self.emph_stack.pop())
        elif tag == "a":
            href = self.href_stack.pop() if self.href_stack else ""
            self._emit_text(f"]({href})" if href else "]")
        elif tag == "pre":
            code = "".join(self.inline).strip("\n")
            self.inline = []
            self.pre_depth = max(0, self.pre_depth - 1)
            self.blocks.append(f"```\n{code}\n```")
        elif tag == "code":
            if self.pre_depth == 0:
                self._emit_text("`")
        elif tag in ("ul", "ol"):
            if self.list_stack:
                self.list_stack.pop()
        elif tag == "li":
            marker = "- "
            if self.list_stack:
                frame = self.list_stack[-1]
                if frame["ordered"]:
                    frame["index"] += 1
                    marker = f"{frame['index']}. "
            self._flush_inline(prefix=marker)
        elif tag in ("td", "th"):
            if self.cell is not None and self.table_rows:
                self.table_rows[-1].append(re.sub(r"\s+", " ", "".join(self.cell)).strip())
            self.cell = None
        elif tag == "table":
            self.in_table = False
            rows = [r for r in self.table_rows if r]
            if rows:
                lines = ["| " + " | ".join(rows[0]) + " |"]
                lines.append("|" + "|".join(" --- " for _ in rows[0]) + "|")
                for row in rows[1:]:
                    lines.append("| " + " | ".join(row) + " |")
                self.blocks.append("\n".join(lines))
            self.table_rows = []
        elif tag.startswith("h") and len(tag) == 2 and tag[1].isdigit():
            level = int(tag[1])
            self._flush_inline(prefix="#" * level + " ")
        elif tag == "p":
            self._flush_inline()

    def handle_data(self, data):
        if self.skip_depth:
            return
        self._emit_text(data)

    def result(self) -> str:
        self._flush_toplevel()
        text = "\n\n".join(b for b in self.blocks if b.strip())
        text = re.sub(r"\n{3,}", "\n\n", text)
        return text.strip()

    def _flush_toplevel(self) -> None:
        # bare text outside any element keeps its own line structure so the
        # converter is idempotent on Markdown input
        raw = "".join(self.inline)
        self.inline = []
        if not raw.strip():
            return
        for chunk in re.split(r"\n\s*\n", raw):
            lines = [line.rstrip() for line in chunk.split("\n")]
            block = "\n".join(line for line in lines).strip("\n")
            if block.strip():
                self.blocks.append(block)


def html_to_markdown(html: str, image_handler: ImageHandler | None = None) -> str:
    """Lenient HTML to Markdown; unknown tags are stripped, their text kept."""
    builder = _MarkdownBuilder(image_handler=image_handler)
    builder.feed(html)
    builder.close()
    return builder.result()


# ---------------------------------------------------------------------------
# Notebooks, R docs, source trees
# ---------------------------------------------------------------------------

def parse_notebook(payload: Path | str, doc_id: str | None = None, source_id: str = "") -> DocumentText:
    """Markdown cells verbatim, code cells fenced, raw cells plain; outputs dropped."""
    payload = Path(payload)
    try:
        raw = json.loads(payload.read_text(encoding="utf-8"))
        cells = raw["cells"]
        if not isinstance(cells, list):
            raise TypeError("cells is not a list")
    except Exception as exc:
        raise MalformedNotebook(f"{payload}: {exc}") from exc
    parts: list[str] = []
    for cell in cells:
        source = cell.get("source", "")
        text = "".join(source) if isinstance(source, list) else str(source)
        kind = cell.get("cell_type")
        if not text.strip():
            continue
        if kind == "code":
            parts.append(f"```\n{text.rstrip()}\n```")
        else:  # markdown and raw cells pass through as text
            parts.append(text.rstrip())
    text = "\n\n".join(parts).strip()
    if not text:
        raise EmptyExtraction(f"{payload}: notebook has no content cells")
    return DocumentText(
        doc_id=doc_id or payload.stem,
        source_id=source_id,
        content_type=ContentType.NOTEBOOK,
        text=text,
        section_map=build_section_map(text),
    )


_RD_SECTIONS = ("name", "description", "usage", "examples")


def parse_r_docs(paths: Sequence[Path | str], doc_id: str = "r-docs", source_id: str = "") -> DocumentText:
    """Merge .md/.Rmd under file headings and reduce .Rd files to their
    name/description/usage/examples sections."""
    if not paths:
        raise ValueError("parse_r_docs needs at least one path")
    parts: list[str] = []
    readable = 0
    for path in paths:
        path = Path(path)
        try:
            raw = path.read_text(encoding="utf-8", errors="replace")
        except OSError as exc:
            logger.warning("unreadable R doc %s: %s", path, exc)
            continue
        readable += 1
        if path.suffix.lower() in (".md", ".rmd"):
            parts.append(f"# {path.name}\n\n{raw.strip()}")
        elif path.suffix.lower() == ".rd":
            parts.append(_render_rd(raw))
        else:
            parts.append(f"# {path.name}\n\n{raw.strip()}")
    if readable == 0:
        raise AllFilesUnreadable(f"none of {len(list(paths))} paths could be read")
    text = "\n\n".join(p for p in parts if p.strip()).strip()
    if not text:
        raise EmptyExtraction("R docs contained no text")
    return DocumentText(
        doc_id=doc_id,
        source_id=source_id,
        content_type=ContentType.R_PACKAGE,
        text=text,
        section_map=build_section_map(text),
    )


def _render_rd(raw: str) -> str:
    sections = {name: _rd_macro(raw, name) for name in _RD_SECTIONS}
    parts: list[str] = []
    name = sections.get("name")
    if name:
        parts.append(f"# {name.strip()}")
    for section in ("description", "usage", "examples"):
        body = sections.get(section)
        if body:
            parts.append(f"## {section.capitalize()}\n\n{body.strip()}")
    return "\n\n".join(parts)


def _rd_macro(raw: str, name: str) -> str | None:
    """Balanced-brace extraction of one \\name{...}-style macro body."""
    marker = f"\\{name}{{"
    start = raw.find(marker)
    if start < 0:
        return None
    depth = 1
    i = start + len(marker)
    out: list[str] = []
    while i < len(raw) and depth > 0:
        ch = raw[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                break
        out.append(ch)
        i += 1
    return "".join(out)


def consolidate_sources(
    paths: Sequence[Path | str],
    kinds: Sequence[str],
    doc_id: str = "sources",
    source_id: str = "",
    content_type: ContentType = ContentType.PYTHON_PACKAGE,
) -> DocumentText:
    """Concatenate matching files under === path === headers, path-sorted."""
    if not kinds:
        raise ValueError("consolidate_sources needs a non-empty extension filter")
    suffixes = {k.lower() if k.startswith(".") else f".{k.lower()}" for k in kinds}
    matched = [Path(p) for p in paths if Path(p).suffix.lower() in suffixes]
    if not matched:
        raise NoMatchingFiles(f"no files matching {sorted(suffixes)}")
    try:
        import os

        base = Path(os.path.commonpath([str(p.parent) for p in matched]))
    except ValueError:
        base = None
    keyed = sorted(matched, key=lambda p: str(p.relative_to(base)) if base else str(p))
    parts = []
    for path in keyed:
        rel = str(path.relative_to(base)) if base else str(path)
        body = path.read_text(encoding="utf-8", errors="replace").rstrip()
        parts.append(f"=== {rel} ===\n{body}")
    text = "\n\n".join(parts)
    return DocumentText(
        doc_id=doc_id,
        source_id=source_id,
        content_type=content_type,
        text=text,
        section_map=build_section_map(text),
    )


# ---------------------------------------------------------------------------
# Forum threads
# ---------------------------------------------------------------------------

def normalize_thread(raw_thread: dict, ocr=None) -> ThreadRecord:
    """Clean a structured forum capture into a ThreadRecord.

    Body and reply HTML go through the Markdown rules; each image reference is
    replaced by "[FIGURE-TEXT: ...]" on OCR success or "[FIGURE]" otherwise.
    """
    title = (raw_thread.get("title") or "").strip()
    if not title:
        raise MissingTitle(f"thread {raw_thread.get('question_id', '?')} has no title")

    def handle_image(src: str, alt: str) -> str:
        if ocr is not None and src:
            try:
                text = ocr.image_to_text(src)
            except Exception as exc:
                logger.info("OCR failed for %s: %s", src, exc)
                text = ""
            if text and text.strip():
                return f"[FIGURE-TEXT: {text.strip()}]"
        return "[FIGURE]"

    body = html_to_markdown(raw_thread.get("body", ""), image_handler=handle_image)
    replies: list[tuple[str, str]] = []
    for reply in raw_thread.get("replies", []):
        role = ROLE_AUTHOR if reply.get("is_author") else ROLE_REPLIER
        replies.append((role, html_to_markdown(reply.get("text", ""), image_handler=handle_image)))
    tags: list[str] = []
    for tag in raw_thread.get("tags", []):
        lowered = tag.strip().lower()
        if lowered and lowered not in tags:
            tags.append(lowered)
    return ThreadRecord(
        question_id=str(raw_thread.get("question_id", "")),
        title=title,
        body=body,
        replies=replies,
        votes=int(raw_thread.get("votes", 0)),
        views=int(raw_thread.get("views", 0)),
        tags=tags,
        updated_at=str(raw_thread.get("updated_at", "")),
    )
