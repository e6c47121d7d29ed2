"""Source catalog loading, pluggable fetchers, and corpus coverage reports."""
from __future__ import annotations

import csv
import json
import logging
import re
import shutil
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Protocol

from .errors import (
    DuplicateId,
    MissingColumn,
    NoFetcherForType,
    OrphanResult,
    UnknownContentType,
)

logger = logging.getLogger(__name__)

CATALOG_COLUMNS = ("id", "tool_or_topic", "content_type", "locator", "priority")
DEFAULT_PAGE_CAP = 500


class ContentType(str, Enum):
    PDF_MANUAL = "pdf_manual"
    GITHUB_REPO = "github_repo"
    GITHUB_README = "github_readme"
    R_PACKAGE = "r_package"
    PYTHON_PACKAGE = "python_package"
    ARTICLE = "article"
    WEBSITE = "website"
    NOTEBOOK = "notebook"
    FORUM_THREAD = "forum_thread"

    @classmethod
    def parse(cls, text: str) -> "ContentType":
        key = re.sub(r"[\s_\-]", "", text).lower()
        for member in cls:
            if key == member.value.replace("_", ""):
                return member
        raise UnknownContentType(f"unknown content type {text!r}")


class FetchStatus(str, Enum):
    OK = "ok"
    PARTIAL = "partial"
    FAILED = "failed"


@dataclass(frozen=True)
class SourceRecord:
    id: str
    tool_or_topic: str
    content_type: ContentType
    locator: str
    priority: int = 0

    def __post_init__(self) -> None:
        if not self.locator:
            raise ValueError(f"source {self.id}: locator must be non-empty")
        if self.priority < 0:
            raise ValueError(f"source {self.id}: priority must be >= 0")


@dataclass
class FetchResult:
    source_id: str
    payload_paths: list[str]
    pages_fetched: int
    status: FetchStatus
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "payload_paths": self.payload_paths,
            "pages_fetched": self.pages_fetched,
            "status": self.status.value,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FetchResult":
        return cls(
            source_id=raw["source_id"],
            payload_paths=list(raw["payload_paths"]),
            pages_fetched=raw["pages_fetched"],
            status=FetchStatus(raw["status"]),
            message=raw.get("message", ""),
        )


@dataclass
class TypeCoverage:
    sources: int
    fetched_ok: int

    @property
    def success_rate(self) -> float:
        return self.fetched_ok / self.sources if self.sources else 0.0


@dataclass
class CatalogReport:
    per_type: dict[ContentType, TypeCoverage]
    overall: TypeCoverage

    def to_dict(self) -> dict:
        return {
            "per_type": {
                ct.value: {"sources": cov.sources, "fetched_ok": cov.fetched_ok, "success_rate": cov.success_rate}
                for ct, cov in self.per_type.items()
            },
            "overall": {
                "sources": self.overall.sources,
                "fetched_ok": self.overall.fetched_ok,
                "success_rate": self.overall.success_rate,
            },
        }


def load_catalog(path: Path | str, format: str = "csv") -> list[SourceRecord]:
    """Parse the catalog CSV into source records, rejecting duplicate ids."""
    if format.lower() != "csv":
        raise ValueError(f"unsupported catalog format {format!r}")
    path = Path(path)
    records: list[SourceRecord] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in CATALOG_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing columns {missing}")
        for row_no, row in enumerate(reader, start=2):
            source_id = (row["id"] or "").strip()
            if source_id in seen:
                raise DuplicateId(f"{path} row {row_no}: duplicate id {source_id!r}")
            seen.add(source_id)
            try:
                content_type = ContentType.parse(row["content_type"] or "")
            except UnknownContentType as exc:
                raise UnknownContentType(f"{path} row {row_no}: {exc}") from exc
            records.append(
                SourceRecord(
                    id=source_id,
                    tool_or_topic=(row["tool_or_topic"] or "").strip(),
                    content_type=content_type,
                    locator=(row["locator"] or "").strip(),
                    priority=int(row["priority"] or 0),
                )
            )
    return records


# ---------------------------------------------------------------------------
# Fetchers
# ---------------------------------------------------------------------------

class FetcherProvider(Protocol):
    def fetch(self, record: SourceRecord, dest: Path, page_cap: int) -> FetchResult: ...


class LocalDirectoryFetcher:
    """Copies a local file or directory tree into the raw workspace.

    Stands in for repository clones and pre-downloaded payloads; the copy is
    deterministic (sorted walk), so reruns are byte-identical.
    """

    def fetch(self, record: SourceRecord, dest: Path, page_cap: int) -> FetchResult:
        src = Path(record.locator)
        if not src.exists():
            return FetchResult(record.id, [], 0, FetchStatus.FAILED, f"locator not found: {src}")
        dest.mkdir(parents=True, exist_ok=True)
        copied: list[str] = []
        if src.is_file():
            target = dest / src.name
            shutil.copyfile(src, target)
            copied.append(src.name)
        else:
            for path in sorted(p for p in src.rglob("*") if p.is_file()):
                rel = path.relative_to(src)
                target = dest / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(path, target)
                copied.append(str(rel))
        status = FetchStatus.OK if copied else FetchStatus.FAILED
        message = "" if copied else "no files under locator"
        return FetchResult(record.id, copied, len(copied), status, message)


_HREF_RE = re.compile(r"""href\s*=\s*["']([^"'#]+)""", re.IGNORECASE)

Transport = Callable[[str], tuple[int, str, bytes]]


def _httpx_transport(url: str) -> tuple[int, str, bytes]:
    import httpx

    response = httpx.get(url, follow_redirects=True, timeout=30.0)
    return response.status_code, response.headers.get("content-type", ""), response.content


class HttpCrawlFetcher:
    """Breadth-first same-host crawl bounded by the page cap.

    The transport is injectable (tests use canned responses); failed page
    loads are retried with exponential backoff before being skipped.
    """

    def __init__(
        self,
        transport: Transport | None = None,
        retries: int = 3,
        backoff_base: float = 0.5,
        sleep: Callable[[float], None] | None = None,
    ):
        import time

        self.transport = transport or _httpx_transport
        self.retries = retries
        self.backoff_base = backoff_base
        self.sleep = sleep or time.sleep

    def _get(self, url: str) -> tuple[int, str, bytes]:
        last: Exception | None = None
        for attempt in range(self.retries):
            try:
                return self.transport(url)
            except Exception as exc:
                last = exc
                if attempt + 1 < self.retries:
                    self.sleep(self.backoff_base * (2**attempt))
        raise ConnectionError(f"fetch failed after {self.retries} attempts: {last}")

    def fetch(self, record: SourceRecord, dest: Path, page_cap: int) -> FetchResult:
        from urllib.parse import urljoin, urlparse

        root = record.locator
        host = urlparse(root).netloc
        dest.mkdir(parents=True, exist_ok=True)
        queue: deque[str] = deque([root])
        seen: set[str] = {root}
        saved: list[str] = []
        while queue and len(saved) < page_cap:
            url = queue.popleft()
            try:
                status, _ctype, body = self._get(url)
            except Exception as exc:
                if not saved:
                    return FetchResult(record.id, [], 0, FetchStatus.FAILED, str(exc))
                logger.warning("skipping %s: %s", url, exc)
                continue
            if status >= 400:
                if not saved:
                    return FetchResult(record.id, [], 0, FetchStatus.FAILED, f"HTTP {status} for {url}")
                continue
            name = f"page_{len(saved) + 1:05d}.html"
            (dest / name).write_bytes(body)
            saved.append(name)
            for href in _HREF_RE.findall(body.decode("utf-8", errors="replace")):
                absolute = urljoin(url, href)
                if urlparse(absolute).netloc == host and absolute not in seen:
                    seen.add(absolute)
                    queue.append(absolute)
        if not saved:
            return FetchResult(record.id, [], 0, FetchStatus.FAILED, "no pages fetched")
        status = FetchStatus.PARTIAL if queue else FetchStatus.OK
        message = f"page cap reached with {len(queue)} urls pending" if queue else ""
        return FetchResult(record.id, saved, len(saved), status, message)


@dataclass
class FetcherRegistry:
    fetchers: dict[ContentType, FetcherProvider] = field(default_factory=dict)

    def register(self, content_type: ContentType, fetcher: FetcherProvider) -> None:
        self.fetchers[content_type] = fetcher

    def resolve(self, content_type: ContentType) -> FetcherProvider:
        fetcher = self.fetchers.get(content_type)
        if fetcher is None:
            raise NoFetcherForType(f"no fetcher registered for {content_type.value}")
        return fetcher


def fetch_source(
    record: SourceRecord,
    fetcher: FetcherProvider,
    page_cap: int = DEFAULT_PAGE_CAP,
    workspace: Path | str = ".",
    clock: Callable[[], datetime] = lambda: datetime.now(timezone.utc),
) -> FetchResult:
    """Run one fetch into workspace/raw/{source_id}/ and write its manifest."""
    if page_cap < 1:
        raise ValueError("page_cap must be >= 1")
    dest = Path(workspace) / "raw" / record.id
    try:
        result = fetcher.fetch(record, dest, page_cap)
    except Exception as exc:
        logger.warning("fetch failed for %s: %s", record.id, exc)
        result = FetchResult(record.id, [], 0, FetchStatus.FAILED, str(exc))
    dest.mkdir(parents=True, exist_ok=True)
    manifest = {
        "source_id": record.id,
        "locator": record.locator,
        "retrieved_at": clock().isoformat(),
        "paths": result.payload_paths,
        "status": result.status.value,
        "message": result.message,
    }
    (dest / "_fetch_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return result


def verify_corpus(catalog: Iterable[SourceRecord], results: Iterable[FetchResult]) -> CatalogReport:
    """Per-content-type coverage; Partial fetches count as successes."""
    by_id = {record.id: record for record in catalog}
    per_type: dict[ContentType, TypeCoverage] = {
        ct: TypeCoverage(0, 0) for ct in {r.content_type for r in by_id.values()}
    }
    for record in by_id.values():
        per_type[record.content_type].sources += 1
    ok_total = 0
    for result in results:
        record = by_id.get(result.source_id)
        if record is None:
            raise OrphanResult(f"result for unknown source {result.source_id!r}")
        if result.status in (FetchStatus.OK, FetchStatus.PARTIAL):
            per_type[record.content_type].fetched_ok += 1
            ok_total += 1
    return CatalogReport(per_type=per_type, overall=TypeCoverage(len(by_id), ok_total))
