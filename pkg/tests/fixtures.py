"""Synthetic desk-scale corpus: 3 tool sources + 20 forum threads."""
from __future__ import annotations

import json
from pathlib import Path

import yaml

SPECIES = [
    "zebrafish", "fruitfly", "nematode", "thale-cress", "budding-yeast",
    "house-mouse", "rice", "maize", "stickleback", "axolotl",
    "platypus", "lamprey", "quail", "medaka", "tardigrade",
    "honeybee", "silkworm", "salmon", "barley", "sorghum",
]
TOOLS = ["alignerx", "vcfsmith", "readpolish", "peakmapper", "countwrangler"]


def _readme_text() -> str:
    return "\n".join(
        [
            "# alignerx",
            "",
            "alignerx is a splice-aware aligner tuned for short nanopore-corrected reads version 2.4.1.",
            "",
            "## Install",
            "",
            "Install alignerx with `pip install alignerx` and verify the binary with alignerx --version afterwards.",
            "The indexing step requires roughly eight gigabytes of memory for a vertebrate genome build.",
            "",
            "## Quick start",
            "",
            "Run alignerx --reference genome.fa --reads sample.fq --threads 8 to produce a sorted alignment file.",
            "The --preset nanopore flag switches the scoring matrix to long-read gap penalties for noisy data.",
        ]
    )


def _python_files() -> dict[str, str]:
    return {
        "core.py": '\n'.join(
            [
                '"""Core scoring routines for the countwrangler package."""',
                "",
                "DEFAULT_PSEUDOCOUNT = 0.5",
                "",
                "def normalize_counts(matrix, pseudocount=DEFAULT_PSEUDOCOUNT):",
                '    """Normalize a raw count matrix with the median-of-ratios method used by countwrangler."""',
                "    totals = [sum(row) + pseudocount for row in matrix]",
                "    return [[value / total for value in row] for row, total in zip(matrix, totals)]",
                "",
            ]
        ),
        "cli.py": '\n'.join(
            [
                '"""Command line entry point wiring argparse flags to the normalizer."""',
                "",
                "def build_parser(parser):",
                '    parser.add_argument("--pseudocount", type=float, default=0.5, help="stabilizer added to library totals before normalization")',
                '    parser.add_argument("--min-count", type=int, default=10, help="drop genes whose total raw count stays below this threshold")',
                "    return parser",
                "",
            ]
        ),
    }


def _website_pages() -> dict[str, str]:
    return {
        "index.html": (
            "<h1>vcfsmith tutorials</h1>"
            "<p>vcfsmith merges multi-sample variant files while preserving provenance headers from each caller.</p>"
            "<p>The tutorial collection below walks through filtering, annotation, and export workflows step by step.</p>"
        ),
        "filtering.html": (
            "<h2>Filtering variants</h2>"
            "<p>Use vcfsmith filter --min-qual 30 --max-missing 0.1 to drop low confidence sites before annotation.</p>"
            "<pre><code>vcfsmith filter --min-qual 30 calls.vcf.gz</code></pre>"
        ),
        "export.html": (
            "<h2>Exporting tables</h2>"
            "<p>The export subcommand writes tab separated tables with one row per variant and one column per sample.</p>"
            "<p>Pass --fields CHROM,POS,REF,ALT to control exactly which columns appear in the final table.</p>"
        ),
    }


_PROBLEMS = [
    "coverage drops sharply near repetitive regions",
    "duplicate rates climb past forty percent",
    "insert size estimates swing wildly between lanes",
    "soft-clipped bases pile up at contig boundaries",
]
_FIXES = [
    "raise the mapping quality cutoff to {q} and rerun {tool} with the --sensitive preset",
    "rebuild the {species} index with kmer size {q} before letting {tool} touch batch{index:03d}",
    "trim residual adapters with fastclean and only then feed {tool} the batch{index:03d} libraries",
    "enable the --split-ambiguous flag so {tool} distributes multimappers across batch{index:03d}",
]


def _thread_capture(index: int) -> dict:
    species = SPECIES[index % len(SPECIES)]
    tool = TOOLS[index % len(TOOLS)]
    problem = _PROBLEMS[index % len(_PROBLEMS)]
    fix = _FIXES[index % len(_FIXES)].format(q=15 + index, tool=tool, species=species, index=index)
    qid = f"thr-{index:03d}"
    return {
        "question_id": qid,
        "title": f"How should I process {species} samples with {tool}?",
        "body": (
            f"<p>I am analysing {species} sequencing libraries labelled batch{index:03d} and {problem} "
            f"whenever I run {tool} with default settings.</p>"
        ),
        "replies": [
            {
                "is_author": False,
                "text": (
                    f"<p>For the {species} batch{index:03d} libraries you should {fix}; afterwards the "
                    f"{problem.split()[0]} issue clears up almost entirely.</p>"
                ),
            },
            {
                "is_author": True,
                "text": (
                    f"<p>Thanks, applying that change for batch{index:03d} on the {species} run fixed the "
                    f"problem with {tool} completely.</p>"
                ),
            },
        ],
        "votes": index % 7,
        "views": 40 + index * 3,
        "tags": [species, tool, "coverage"],
        "updated_at": f"2024-03-{(index % 28) + 1:02d}T12:00:00Z",
    }


def build_desk_corpus(root: Path) -> Path:
    """Create source payload directories plus the catalog CSV; returns catalog path."""
    sources = root / "sources"
    readme_dir = sources / "alignerx-readme"
    readme_dir.mkdir(parents=True)
    (readme_dir / "README.md").write_text(_readme_text())

    py_dir = sources / "countwrangler-src"
    py_dir.mkdir(parents=True)
    for name, text in _python_files().items():
        (py_dir / name).write_text(text)

    web_dir = sources / "vcfsmith-site"
    web_dir.mkdir(parents=True)
    for name, html in _website_pages().items():
        (web_dir / name).write_text(html)

    forum_dir = sources / "forum-threads"
    forum_dir.mkdir(parents=True)
    for i in range(20):
        (forum_dir / f"thread_{i:03d}.json").write_text(json.dumps(_thread_capture(i)))

    catalog = root / "catalog.csv"
    catalog.write_text(
        "id,tool_or_topic,content_type,locator,priority\n"
        f"alignerx-readme,alignerx,github_readme,{readme_dir},0\n"
        f"countwrangler-src,countwrangler,python_package,{py_dir},1\n"
        f"vcfsmith-site,vcfsmith,website,{web_dir},2\n"
        f"forum,bioinformatics-forum,forum_thread,{forum_dir},3\n"
    )
    return catalog


def desk_config(root: Path, catalog: Path, **overrides) -> Path:
    config = {
        "catalog": {"path": str(catalog)},
        "fetch": {"page_cap": 500, "workers": 4, "fetchers": {"default": "local"}},
        "generation": {"workers": 4, "char_budget": 24000},
        "providers": {
            "gateway": {"kind": "offline", "pairs_per_request": 3},
            "embedder": {"kind": "hashing", "dim": 48},
            "token_embedder": {"kind": "hashing_token", "dim": 24},
            "nli": {"kind": "overlap"},
            "pdf": {"kind": "text"},
        },
        "curation": {"semantic_threshold": 0.95, "min_answer_chars": 20, "dedup_mode": "exhaustive"},
        "split": {
            "ratios": {"train": 0.8, "val": 0.1, "test": 0.1},
            "k_clusters": 5,
            "seed": 11,
            "min_test_per_cluster": 1,
        },
        "evaluate": {"use_gateway": True, "run_id": "baseline-gateway"},
        "export": {"strict": False},
        "finetune": {"overrides": {}},
    }
    config.update(overrides)
    path = root / "config.yaml"
    path.write_text(yaml.safe_dump(config, sort_keys=True))
    return path
