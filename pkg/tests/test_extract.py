from __future__ import annotations

import json

import pytest

from qaforge.catalog import ContentType
from qaforge.errors import (
    AllFilesUnreadable,
    EmptyExtraction,
    MalformedNotebook,
    MissingTitle,
    NoMatchingFiles,
)
from qaforge.extract import (
    DocumentText,
    ROLE_AUTHOR,
    ROLE_REPLIER,
    build_section_map,
    consolidate_sources,
    extract_pdf_text,
    html_to_markdown,
    normalize_thread,
    parse_notebook,
    parse_r_docs,
)


class FixtureConverter:
    def __init__(self, text: str):
        self.text = text

    def extract_text(self, path):
        return self.text


# ---------------------------------------------------------------------------
# PDF text
# ---------------------------------------------------------------------------

def test_extract_pdf_title_heading(tmp_path):
    payload = tmp_path / "m.pdf"
    payload.write_bytes(b"%")
    doc = extract_pdf_text(payload, FixtureConverter("Title\n\nBody"))
    assert doc.text == "Title\n\nBody"
    assert [h for h, _ in doc.section_map] == ["Title"]


def test_extract_pdf_empty_extraction(tmp_path):
    payload = tmp_path / "m.pdf"
    payload.write_bytes(b"%")
    with pytest.raises(EmptyExtraction):
        extract_pdf_text(payload, FixtureConverter("  \n \t \f "))


def test_extract_pdf_two_page_section_map(tmp_path):
    payload = tmp_path / "m.pdf"
    payload.write_bytes(b"%")
    pages = "# Install\npip install tool\f# Usage\ntool --input data.vcf"
    doc = extract_pdf_text(payload, FixtureConverter(pages))
    headings = [h for h, _ in doc.section_map]
    assert headings == ["Install", "Usage"]
    offsets = [o for _, o in doc.section_map]
    assert offsets == sorted(offsets)
    assert offsets[0] < offsets[1] <= len(doc.text.encode("utf-8"))


def test_section_map_offsets_strictly_increasing():
    text = "INTRO\nbody text\n\nUSAGE DETAILS\nmore body\n\n## Sub Heading\nfinal"
    section_map = build_section_map(text)
    offsets = [o for _, o in section_map]
    assert offsets == sorted(set(offsets))
    assert [h for h, _ in section_map] == ["INTRO", "USAGE DETAILS", "Sub Heading"]


# ---------------------------------------------------------------------------
# HTML -> Markdown
# ---------------------------------------------------------------------------

def test_html_heading_and_paragraph():
    assert html_to_markdown("<h1>Tool</h1><p>Run it.</p>") == "# Tool\n\nRun it."


def test_html_pre_code_block():
    out = html_to_markdown("<pre><code>plink --bfile x</code></pre>")
    assert out == "```\nplink --bfile x\n```"


def test_html_plain_text_identity():
    text = "No tags at all, just text."
    assert html_to_markdown(text) == text


def test_html_idempotent_on_own_output():
    html = (
        "<h2>Guide</h2><p>Use <strong>bold</strong> and <em>em</em> moves.</p>"
        "<ul><li>one</li><li>two</li></ul>"
        "<ol><li>first</li><li>second</li></ol>"
        "<pre>code line</pre>"
        '<p>See <a href="https://example.org/x">docs</a>.</p>'
        "<table><tr><th>h1</th><th>h2</th></tr><tr><td>a</td><td>b</td></tr></table>"
    )
    once = html_to_markdown(html)
    assert html_to_markdown(once) == once


def test_html_strips_script_and_unknown_tags():
    html = "<div>kept text</div><script>alert('x')</script><style>p{}</style><custom>inner</custom>"
    out = html_to_markdown(html)
    assert "kept text" in out and "inner" in out
    assert "alert" not in out and "p{}" not in out


def test_html_lists_and_breaks():
    out = html_to_markdown("<ul><li>alpha</li><li>beta</li></ul>")
    assert "- alpha" in out and "- beta" in out
    out = html_to_markdown("<ol><li>alpha</li><li>beta</li></ol>")
    assert "1. alpha" in out and "2. beta" in out
    assert html_to_markdown("line<br>break") == "line\nbreak"


def test_html_collapses_blank_lines():
    out = html_to_markdown("<p>a</p>\n\n\n\n<p>b</p>")
    assert "\n\n\n" not in out


def test_html_link_rendering():
    assert html_to_markdown('<p><a href="http://x.y">name</a></p>') == "[name](http://x.y)"


# ---------------------------------------------------------------------------
# notebooks
# ---------------------------------------------------------------------------

def _write_notebook(path, cells):
    path.write_text(json.dumps({"cells": cells, "nbformat": 4}))


def test_parse_notebook_markdown_then_code(tmp_path):
    nb = tmp_path / "a.ipynb"
    _write_notebook(
        nb,
        [
            {"cell_type": "markdown", "source": ["## Intro"]},
            {"cell_type": "code", "source": ["x=1"], "outputs": [{"text": "1"}]},
        ],
    )
    doc = parse_notebook(nb)
    assert doc.text == "## Intro\n\n```\nx=1\n```"
    assert doc.content_type == ContentType.NOTEBOOK


def test_parse_notebook_raw_cells_pass_through(tmp_path):
    nb = tmp_path / "a.ipynb"
    _write_notebook(nb, [{"cell_type": "raw", "source": "raw cell text"}])
    assert parse_notebook(nb).text == "raw cell text"


def test_parse_notebook_empty_cells_is_empty_extraction(tmp_path):
    nb = tmp_path / "a.ipynb"
    _write_notebook(nb, [])
    with pytest.raises(EmptyExtraction):
        parse_notebook(nb)


def test_parse_notebook_malformed(tmp_path):
    nb = tmp_path / "a.ipynb"
    nb.write_text("not json {")
    with pytest.raises(MalformedNotebook):
        parse_notebook(nb)
    nb.write_text(json.dumps({"no_cells": True}))
    with pytest.raises(MalformedNotebook):
        parse_notebook(nb)


def test_parse_notebook_fenced_blocks_match_code_cells(tmp_path):
    nb = tmp_path / "a.ipynb"
    cells = []
    for i in range(5):
        cells.append({"cell_type": "markdown", "source": [f"notes {i}"]})
        cells.append({"cell_type": "code", "source": [f"x = {i}"]})
    _write_notebook(nb, cells)
    doc = parse_notebook(nb)
    assert doc.text.count("```") == 2 * 5  # one fence pair per code cell


# ---------------------------------------------------------------------------
# R docs
# ---------------------------------------------------------------------------

def test_parse_r_docs_rd_sections(tmp_path):
    rd = tmp_path / "scorer.Rd"
    rd.write_text("\\name{scorer}\n\\title{ignored}\n\\usage{scorer(x)}\n")
    doc = parse_r_docs([rd])
    headings = [h for h, _ in doc.section_map]
    assert "scorer" in headings
    assert "Usage" in headings
    assert "scorer(x)" in doc.text
    assert "ignored" not in doc.text


def test_parse_r_docs_md_order_preserved(tmp_path):
    a = tmp_path / "a.md"
    b = tmp_path / "b.md"
    a.write_text("alpha body")
    b.write_text("beta body")
    doc = parse_r_docs([a, b])
    assert doc.text.index("alpha body") < doc.text.index("beta body")
    assert "# a.md" in doc.text and "# b.md" in doc.text


def test_parse_r_docs_empty_list_is_error():
    with pytest.raises(ValueError):
        parse_r_docs([])


def test_parse_r_docs_all_unreadable(tmp_path):
    with pytest.raises(AllFilesUnreadable):
        parse_r_docs([tmp_path / "missing1.md", tmp_path / "missing2.Rd"])


def test_parse_r_docs_nested_braces(tmp_path):
    rd = tmp_path / "fn.Rd"
    rd.write_text("\\name{fn}\n\\examples{run(list(a={1}, b=2))}")
    doc = parse_r_docs([rd])
    assert "run(list(a={1}, b=2))" in doc.text


# ---------------------------------------------------------------------------
# source consolidation
# ---------------------------------------------------------------------------

def test_consolidate_sources_sorted_headers(tmp_path):
    (tmp_path / "zz.py").write_text("print('z')")
    (tmp_path / "aa.py").write_text("print('a')")
    doc = consolidate_sources([tmp_path / "zz.py", tmp_path / "aa.py"], kinds=[".py"])
    assert doc.text.index("=== aa.py ===") < doc.text.index("=== zz.py ===")


def test_consolidate_sources_no_match(tmp_path):
    (tmp_path / "x.txt").write_text("nope")
    with pytest.raises(NoMatchingFiles):
        consolidate_sources([tmp_path / "x.txt"], kinds=[".py"])


def test_consolidate_sources_deterministic(tmp_path):
    (tmp_path / "m.py").write_text("x = 1\n")
    (tmp_path / "n.py").write_text("y = 2\n")
    paths = [tmp_path / "n.py", tmp_path / "m.py"]
    assert consolidate_sources(paths, [".py"]).text == consolidate_sources(paths, [".py"]).text


# ---------------------------------------------------------------------------
# threads
# ---------------------------------------------------------------------------

def _capture(**overrides):
    base = {
        "question_id": "q42",
        "title": "How do I index a BAM?",
        "body": "<p>I have a <strong>bam</strong> file.</p>",
        "replies": [
            {"is_author": False, "text": "<p>Use samtools index.</p>"},
            {"is_author": True, "text": "<p>That worked, thanks.</p>"},
        ],
        "votes": 3,
        "views": 120,
        "tags": ["BAM", "samtools", "bam"],
        "updated_at": "2024-01-01T00:00:00Z",
    }
    base.update(overrides)
    return base


def test_normalize_thread_basic():
    record = normalize_thread(_capture())
    assert record.reply_count == 2
    assert record.replies[0][0] == ROLE_REPLIER
    assert record.replies[1][0] == ROLE_AUTHOR
    assert record.tags == ["bam", "samtools"]
    assert "**bam**" in record.body


def test_normalize_thread_missing_title():
    with pytest.raises(MissingTitle):
        normalize_thread(_capture(title="  "))


def test_normalize_thread_ocr_success():
    class Ocr:
        def image_to_text(self, ref):
            return "AUC=0.81"

    capture = _capture(body='<p>Results:</p><img src="plot.png">')
    record = normalize_thread(capture, ocr=Ocr())
    assert "[FIGURE-TEXT: AUC=0.81]" in record.body


def test_normalize_thread_ocr_failure_keeps_placeholder():
    class FailingOcr:
        def image_to_text(self, ref):
            raise RuntimeError("ocr crashed")

    capture = _capture(body='<p>See</p><img src="plot.png">')
    record = normalize_thread(capture, ocr=FailingOcr())
    assert "[FIGURE]" in record.body
    assert record.title  # extraction still succeeds


def test_normalize_thread_no_ocr_provider():
    capture = _capture(body='<img src="plot.png">')
    assert "[FIGURE]" in normalize_thread(capture, ocr=None).body


# ---------------------------------------------------------------------------
# round trips
# ---------------------------------------------------------------------------

def test_document_text_round_trip():
    doc = DocumentText(
        doc_id="d1",
        source_id="s1",
        content_type=ContentType.WEBSITE,
        text="# T\n\nbody",
        section_map=[("T", 0)],
    )
    clone = DocumentText.from_dict(json.loads(json.dumps(doc.to_dict())))
    assert clone == doc
    assert clone.char_count == len(doc.text)


def test_thread_record_round_trip():
    record = normalize_thread(_capture())
    from qaforge.extract import ThreadRecord

    clone = ThreadRecord.from_dict(json.loads(json.dumps(record.to_dict())))
    assert clone == record
    assert clone.reply_count == record.reply_count
