from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import pytest

from qaforge.catalog import (
    CatalogReport,
    ContentType,
    FetchResult,
    FetchStatus,
    FetcherRegistry,
    HttpCrawlFetcher,
    LocalDirectoryFetcher,
    SourceRecord,
    fetch_source,
    load_catalog,
    verify_corpus,
)
from qaforge.errors import (
    DuplicateId,
    MissingColumn,
    NoFetcherForType,
    OrphanResult,
    UnknownContentType,
)

HEADER = "id,tool_or_topic,content_type,locator,priority\n"


def write_catalog(tmp_path: Path, rows: list[str]) -> Path:
    path = tmp_path / "catalog.csv"
    path.write_text(HEADER + "\n".join(rows) + "\n")
    return path


def record(source_id="s1", content_type=ContentType.WEBSITE, locator="http://example.org", priority=0):
    return SourceRecord(source_id, "tool", content_type, locator, priority)


# ---------------------------------------------------------------------------
# load_catalog
# ---------------------------------------------------------------------------

def test_load_catalog_three_rows_in_order(tmp_path):
    path = write_catalog(
        tmp_path,
        [
            "t1,plink,pdf_manual,/data/m.pdf,0",
            "t2,plink,website,http://example.org,1",
            "t3,prsice,article,doi:10/xyz,2",
        ],
    )
    records = load_catalog(path)
    assert [r.id for r in records] == ["t1", "t2", "t3"]
    assert records[0].content_type == ContentType.PDF_MANUAL
    assert records[1].content_type == ContentType.WEBSITE
    assert records[2].content_type == ContentType.ARTICLE


def test_load_catalog_case_insensitive_types(tmp_path):
    path = write_catalog(tmp_path, ["t1,x,PDF_Manual,/m.pdf,0", "t2,x,GithubReadme,/r,0"])
    records = load_catalog(path)
    assert records[0].content_type == ContentType.PDF_MANUAL
    assert records[1].content_type == ContentType.GITHUB_README


def test_load_catalog_unknown_type_names_row(tmp_path):
    path = write_catalog(tmp_path, ["t1,x,blog,http://x,0"])
    with pytest.raises(UnknownContentType, match="row 2"):
        load_catalog(path)


def test_load_catalog_duplicate_id(tmp_path):
    path = write_catalog(tmp_path, ["t1,x,website,http://a,0", "t1,y,website,http://b,0"])
    with pytest.raises(DuplicateId, match="t1"):
        load_catalog(path)


def test_load_catalog_missing_column(tmp_path):
    path = tmp_path / "catalog.csv"
    path.write_text("id,tool_or_topic,locator\nx,y,z\n")
    with pytest.raises(MissingColumn):
        load_catalog(path)


# ---------------------------------------------------------------------------
# fetchers
# ---------------------------------------------------------------------------

def test_local_directory_fetch_repo_fixture(tmp_path):
    repo = tmp_path / "repo"
    repo.mkdir()
    (repo / "README.md").write_text("# Tool")
    (repo / "main.py").write_text("print('hi')")
    (repo / "util.py").write_text("x = 1")
    rec = record("repo1", ContentType.GITHUB_REPO, str(repo))
    result = fetch_source(rec, LocalDirectoryFetcher(), page_cap=500, workspace=tmp_path / "ws")
    assert result.status == FetchStatus.OK
    assert sorted(result.payload_paths) == ["README.md", "main.py", "util.py"]
    assert (tmp_path / "ws" / "raw" / "repo1" / "README.md").exists()


def test_fetch_unreachable_locator_fails(tmp_path):
    rec = record("gone", ContentType.GITHUB_REPO, str(tmp_path / "missing"))
    result = fetch_source(rec, LocalDirectoryFetcher(), workspace=tmp_path / "ws")
    assert result.status == FetchStatus.FAILED
    assert result.payload_paths == []


def test_fetch_writes_manifest(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    (src / "f.txt").write_text("payload")
    rec = record("m1", ContentType.ARTICLE, str(src))
    clock = lambda: datetime(2024, 5, 1, tzinfo=timezone.utc)
    fetch_source(rec, LocalDirectoryFetcher(), workspace=tmp_path / "ws", clock=clock)
    manifest = json.loads((tmp_path / "ws" / "raw" / "m1" / "_fetch_manifest.json").read_text())
    assert manifest["source_id"] == "m1"
    assert manifest["status"] == "ok"
    assert manifest["retrieved_at"].startswith("2024-05-01")


def test_fetch_idempotent_payload_tree(tmp_path):
    src = tmp_path / "src"
    (src / "sub").mkdir(parents=True)
    (src / "sub" / "a.txt").write_text("alpha")
    (src / "b.txt").write_text("beta")
    rec = record("r1", ContentType.R_PACKAGE, str(src))
    ws = tmp_path / "ws"
    fetch_source(rec, LocalDirectoryFetcher(), workspace=ws)
    first = {
        p.relative_to(ws): p.read_bytes()
        for p in sorted((ws / "raw" / "r1").rglob("*"))
        if p.is_file() and p.name != "_fetch_manifest.json"
    }
    fetch_source(rec, LocalDirectoryFetcher(), workspace=ws)
    second = {
        p.relative_to(ws): p.read_bytes()
        for p in sorted((ws / "raw" / "r1").rglob("*"))
        if p.is_file() and p.name != "_fetch_manifest.json"
    }
    assert first == second


def _mock_site(pages: int):
    """Transport serving a chain of linked pages page0 -> page1 -> ..."""

    def transport(url: str):
        index = int(url.rstrip("/").rsplit("page", 1)[-1].replace(".html", "") or 0)
        links = ""
        if index + 1 < pages:
            links = f'<a href="/page{index + 1}.html">next</a>'
        # every page also links a few ahead to widen the frontier
        for ahead in range(2, 5):
            if index + ahead < pages:
                links += f'<a href="/page{index + ahead}.html">skip</a>'
        return 200, "text/html", f"<html><body>content {index} {links}</body></html>".encode()

    return transport


def test_website_crawl_respects_page_cap(tmp_path):
    rec = record("site", ContentType.WEBSITE, "http://tool.example/page0.html")
    fetcher = HttpCrawlFetcher(transport=_mock_site(600), sleep=lambda s: None)
    result = fetch_source(rec, fetcher, page_cap=500, workspace=tmp_path / "ws")
    assert result.pages_fetched == 500
    assert result.status == FetchStatus.PARTIAL


def test_website_crawl_complete_site_is_ok(tmp_path):
    rec = record("site", ContentType.WEBSITE, "http://tool.example/page0.html")
    fetcher = HttpCrawlFetcher(transport=_mock_site(5), sleep=lambda s: None)
    result = fetch_source(rec, fetcher, page_cap=500, workspace=tmp_path / "ws")
    assert result.pages_fetched == 5
    assert result.status == FetchStatus.OK


def test_website_crawl_retries_then_fails(tmp_path):
    calls = []

    def flaky(url):
        calls.append(url)
        raise ConnectionError("down")

    rec = record("site", ContentType.WEBSITE, "http://dead.example/")
    fetcher = HttpCrawlFetcher(transport=flaky, retries=3, sleep=lambda s: None)
    result = fetch_source(rec, fetcher, page_cap=10, workspace=tmp_path / "ws")
    assert result.status == FetchStatus.FAILED
    assert len(calls) == 3


def test_registry_resolution():
    registry = FetcherRegistry()
    registry.register(ContentType.WEBSITE, LocalDirectoryFetcher())
    assert registry.resolve(ContentType.WEBSITE) is not None
    with pytest.raises(NoFetcherForType):
        registry.resolve(ContentType.ARTICLE)


# ---------------------------------------------------------------------------
# verify_corpus
# ---------------------------------------------------------------------------

def _ok(source_id):
    return FetchResult(source_id, ["f"], 1, FetchStatus.OK)


def test_verify_corpus_paper_scale_rate():
    catalog = [record(f"s{i}", ContentType.WEBSITE, "http://x") for i in range(101)]
    results = [_ok(f"s{i}") for i in range(100)]
    report = verify_corpus(catalog, results)
    assert report.overall.success_rate == pytest.approx(100 / 101, abs=1e-6)
    assert round(report.overall.success_rate, 3) == 0.990


def test_verify_corpus_empty_results():
    catalog = [record("a"), record("b", ContentType.ARTICLE)]
    report = verify_corpus(catalog, [])
    assert all(cov.success_rate == 0 for cov in report.per_type.values())
    assert sum(cov.sources for cov in report.per_type.values()) == len(catalog)


def test_verify_corpus_per_type_rate():
    catalog = [record(f"n{i}", ContentType.NOTEBOOK, "/n") for i in range(4)]
    results = [_ok(f"n{i}") for i in range(3)]
    report = verify_corpus(catalog, results)
    assert report.per_type[ContentType.NOTEBOOK].success_rate == 0.75


def test_verify_corpus_orphan_result():
    with pytest.raises(OrphanResult):
        verify_corpus([record("a")], [_ok("ghost")])


def test_verify_corpus_counts_partial_as_fetched():
    catalog = [record("w1"), record("w2")]
    results = [
        FetchResult("w1", ["p1"], 500, FetchStatus.PARTIAL),
        FetchResult("w2", [], 0, FetchStatus.FAILED),
    ]
    report = verify_corpus(catalog, results)
    assert report.per_type[ContentType.WEBSITE].fetched_ok == 1
