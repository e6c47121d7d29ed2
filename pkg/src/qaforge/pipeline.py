"""Stage orchestration over the resumable workspace, plus dataset export.

The nine stages run in a fixed order; each stage hashes its inputs (config
section, upstream output hashes, provider fingerprint) and is skipped when
nothing changed, so reruns are no-ops and exports stay byte-stable.
"""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import yaml

from . import analytics
from .catalog import (
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
from .curation import (
    CurationConfig,
    DedupMode,
    EntailmentJudgment,
    QaPair,
    QaStatus,
    Verdict,
    dedup_exact,
    dedup_semantic,
    entailment_screen,
    filter_rules,
    retention_report,
)
from .embedding import CachingEmbedder, EmbeddingCache
from .errors import StageFailure, UnreviewedItemsRemain, UpstreamStale
from .extract import (
    DocumentText,
    consolidate_sources,
    extract_pdf_text,
    html_to_markdown,
    normalize_thread,
    parse_notebook,
    parse_r_docs,
    ThreadRecord,
)
from .finetune import emit_finetune_config
from .generation import generate_qa_batch, generation_report, load_default_templates
from .metrics import EvalExample, MetricProviders, MetricReport, compare_runs, evaluate_run
from .providers import (
    CommandPdfText,
    HashingEmbedder,
    HashingTokenEmbedder,
    HttpGateway,
    MeanTokenEmbedder,
    OfflineGateway,
    OverlapEntailment,
    PassthroughPdfText,
)
from .review import DecisionLog, Decision, ReviewDecision
from .split import (
    ClusterAssignment,
    Split,
    SplitConfig,
    SplitManifest,
    cluster_corpus,
    embed_corpus,
    export_projection_csv,
    leakage_audit,
    load_manifest as load_split_manifest,
    project_2d,
    save_manifest as save_split_manifest,
    stratified_split,
)
from .workspace import StageEntry, StageState, Workspace, canonical_hash

logger = logging.getLogger(__name__)

STAGES = ("catalog", "fetch", "extract", "generate", "curate", "split", "evaluate", "report", "export")

_STAGE_OUTPUTS: dict[str, tuple[str, ...]] = {
    "catalog": ("catalog",),
    "fetch": ("raw", "fetch"),
    "extract": ("docs",),
    "generate": ("qa",),
    "curate": ("curated",),
    "split": ("split",),
    "evaluate": ("eval",),
    "report": ("report",),
    "export": ("export", "finetune"),
}

_STAGE_CONFIG_KEYS: dict[str, tuple[str, ...]] = {
    "catalog": ("catalog",),
    "fetch": ("fetch",),
    "extract": ("extract",),
    "generate": ("generation", "providers"),
    "curate": ("curation", "providers"),
    "split": ("split", "providers"),
    "evaluate": ("evaluate", "providers"),
    "report": ("report",),
    "export": ("export", "finetune"),
}


@dataclass
class PipelineConfig:
    raw: dict

    @classmethod
    def from_file(cls, path: Path | str) -> "PipelineConfig":
        with open(path) as handle:
            data = yaml.safe_load(handle) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config {path} must be a mapping")
        return cls(raw=data)

    def section(self, name: str) -> dict:
        value = self.raw.get(name) or {}
        if not isinstance(value, dict):
            raise ValueError(f"config section {name!r} must be a mapping")
        return value

    def hash_sections(self, names: tuple[str, ...]) -> str:
        return canonical_hash({name: self.section(name) for name in names})


@dataclass
class ProviderBundle:
    gateway: Any
    embedder: Any
    spacy_embedder: Any
    token_embedder: Any
    nli: Any
    pdf: Any
    ocr: Any = None
    fingerprint: dict = field(default_factory=dict)


def build_providers(config: PipelineConfig, workspace: Workspace | None = None) -> ProviderBundle:
    """Construct the provider set named in the config's providers section."""
    section = config.section("providers")

    gateway_cfg = section.get("gateway", {"kind": "offline"})
    kind = gateway_cfg.get("kind", "offline")
    if kind == "offline":
        gateway = OfflineGateway(pairs_per_request=int(gateway_cfg.get("pairs_per_request", 3)))
    elif kind == "http":
        gateway = HttpGateway(
            endpoint=gateway_cfg["endpoint"],
            model=gateway_cfg.get("model", "default"),
            api_key_env=gateway_cfg.get("api_key_env", "QAFORGE_API_KEY"),
            rate_per_sec=float(gateway_cfg.get("rate_per_sec", 2.0)),
            log_dir=workspace.path("gen-logs") if workspace else None,
        )
    else:
        raise ValueError(f"unknown gateway kind {kind!r}")

    emb_cfg = section.get("embedder", {"kind": "hashing"})
    if emb_cfg.get("kind", "hashing") != "hashing":
        raise ValueError(f"unknown embedder kind {emb_cfg.get('kind')!r}")
    embedder = HashingEmbedder(dim=int(emb_cfg.get("dim", 64)))

    token_cfg = section.get("token_embedder", {"kind": "hashing_token"})
    token_embedder = HashingTokenEmbedder(dim=int(token_cfg.get("dim", 32)))
    spacy_embedder = MeanTokenEmbedder(token_embedder)

    nli_cfg = section.get("nli", {"kind": "overlap"})
    if nli_cfg.get("kind", "overlap") != "overlap":
        raise ValueError(f"unknown nli kind {nli_cfg.get('kind')!r}")
    nli = OverlapEntailment()

    pdf_cfg = section.get("pdf", {"kind": "text"})
    if pdf_cfg.get("kind", "text") == "command":
        pdf = CommandPdfText(pdf_cfg["template"])
    else:
        pdf = PassthroughPdfText()

    return ProviderBundle(
        gateway=gateway,
        embedder=embedder,
        spacy_embedder=spacy_embedder,
        token_embedder=token_embedder,
        nli=nli,
        pdf=pdf,
        ocr=None,
        fingerprint=section,
    )


# ---------------------------------------------------------------------------
# Stage bookkeeping
# ---------------------------------------------------------------------------

def _input_hash(
    stage: str,
    config: PipelineConfig,
    upstream_hashes: dict[str, str],
    bundle: ProviderBundle,
    workspace: Workspace,
) -> str:
    payload = {
        "config": config.hash_sections(_STAGE_CONFIG_KEYS[stage]),
        "upstream": upstream_hashes,
        "providers": bundle.fingerprint,
    }
    if stage == "export":
        # new review decisions must invalidate a Done export
        payload["decisions"] = workspace.tree_hash("review")
    return canonical_hash(payload)


def run_stage(
    stage: str,
    config: PipelineConfig,
    workspace: Workspace,
    providers: ProviderBundle | None = None,
    force: bool = False,
    clock: Callable[[], datetime] | None = None,
) -> StageEntry:
    """Execute one stage if its inputs changed; raise UpstreamStale otherwise.

    The manifest survives failures so interrupted runs resume where they left
    off.
    """
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    bundle = providers or build_providers(config, workspace)
    with workspace.lock():
        manifest = workspace.load_manifest()
        manifest.config_hash = canonical_hash(config.raw)

        upstream_hashes: dict[str, str] = {}
        for upstream in STAGES[: STAGES.index(stage)]:
            entry = manifest.entry(upstream)
            expected = _input_hash(upstream, config, dict(upstream_hashes), bundle, workspace)
            if entry.state is not StageState.DONE or entry.input_hash != expected:
                manifest.log("blocked", stage, f"upstream {upstream} is {entry.state.value}", clock)
                workspace.save_manifest(manifest)
                raise UpstreamStale(f"stage {stage!r} needs {upstream!r} to run first")
            upstream_hashes[upstream] = entry.output_hash

        expected_input = _input_hash(stage, config, upstream_hashes, bundle, workspace)
        entry = manifest.entry(stage)
        if not force and entry.state is StageState.DONE and entry.input_hash == expected_input:
            manifest.log("skip", stage, "inputs unchanged", clock)
            workspace.save_manifest(manifest)
            return entry

        runner = _STAGE_RUNNERS[stage]
        try:
            runner(workspace, config, bundle)
        except Exception as exc:
            manifest.log("failed", stage, str(exc), clock)
            workspace.save_manifest(manifest)
            if isinstance(exc, (UpstreamStale, UnreviewedItemsRemain)):
                raise
            raise StageFailure(f"stage {stage!r} failed: {exc}") from exc

        previous_output = entry.output_hash
        entry.state = StageState.DONE
        entry.input_hash = expected_input
        entry.output_hash = workspace.tree_hash(*_STAGE_OUTPUTS[stage])
        entry.finished_at = (clock or (lambda: datetime.now(timezone.utc)))().isoformat()
        if previous_output and previous_output != entry.output_hash:
            for downstream in STAGES[STAGES.index(stage) + 1 :]:
                if manifest.entry(downstream).state is StageState.DONE:
                    manifest.entry(downstream).state = StageState.STALE
        manifest.log("done", stage, entry.output_hash[:12], clock)
        workspace.save_manifest(manifest)
        return entry


def run_all(
    config: PipelineConfig,
    workspace: Workspace,
    providers: ProviderBundle | None = None,
    through: str = "export",
) -> dict[str, StageEntry]:
    bundle = providers or build_providers(config, workspace)
    states: dict[str, StageEntry] = {}
    for stage in STAGES:
        states[stage] = run_stage(stage, config, workspace, bundle)
        if stage == through:
            break
    return states


def stage_states(workspace: Workspace) -> dict[str, str]:
    manifest = workspace.load_manifest()
    return {stage: manifest.entry(stage).state.value for stage in STAGES}


# ---------------------------------------------------------------------------
# Stage implementations
# ---------------------------------------------------------------------------

def _load_catalog_records(workspace: Workspace) -> list[SourceRecord]:
    rows = workspace.read_json("catalog/records.json")
    return [
        SourceRecord(r["id"], r["tool_or_topic"], ContentType(r["content_type"]), r["locator"], r["priority"])
        for r in rows
    ]


def _run_catalog(workspace: Workspace, config: PipelineConfig, bundle: ProviderBundle) -> None:
    section = config.section("catalog")
    path = section.get("path")
    if not path:
        raise ValueError("config catalog.path is required")
    records = load_catalog(path)
    workspace.write_json(
        "catalog/records.json",
        [
            {
                "id": r.id,
                "tool_or_topic": r.tool_or_topic,
                "content_type": r.content_type.value,
                "locator": r.locator,
                "priority": r.priority,
            }
            for r in records
        ],
    )


def _build_registry(section: dict) -> FetcherRegistry:
    registry = FetcherRegistry()
    fetchers = section.get("fetchers", {})
    default_kind = fetchers.get("default", "local")
    for content_type in ContentType:
        kind = fetchers.get(content_type.value, default_kind)
        if kind == "local":
            registry.register(content_type, LocalDirectoryFetcher())
        elif kind == "http":
            registry.register(content_type, HttpCrawlFetcher())
        else:
            raise ValueError(f"unknown fetcher kind {kind!r} for {content_type.value}")
    return registry


def _run_fetch(workspace: Workspace, config: PipelineConfig, bundle: ProviderBundle) -> None:
    section = config.section("fetch")
    page_cap = int(section.get("page_cap", 500))
    workers = int(section.get("workers", 8))
    registry = _build_registry(section)
    records = _load_catalog_records(workspace)

    def fetch_one(record: SourceRecord) -> FetchResult:
        fetcher = registry.resolve(record.content_type)
        return fetch_source(record, fetcher, page_cap=page_cap, workspace=workspace.root)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(fetch_one, records))
    workspace.write_json("fetch/results.json", [r.to_dict() for r in results])
    report = verify_corpus(records, results)
    workspace.write_json("fetch/coverage.json", report.to_dict())


_SOURCE_KINDS = (".py", ".r", ".md", ".rst", ".txt", ".toml", ".cfg", ".json")


def _run_extract(workspace: Workspace, config: PipelineConfig, bundle: ProviderBundle) -> None:
    records = {r.id: r for r in _load_catalog_records(workspace)}
    results = [FetchResult.from_dict(r) for r in workspace.read_json("fetch/results.json")]
    documents: list[DocumentText] = []
    threads: list[ThreadRecord] = []
    thread_sources: dict[str, str] = {}
    for result in results:
        if result.status is FetchStatus.FAILED:
            continue
        record = records[result.source_id]
        payload_dir = workspace.path("raw", record.id)
        payloads = [payload_dir / p for p in result.payload_paths]
        try:
            if record.content_type is ContentType.FORUM_THREAD:
                for payload in sorted(payloads):
                    capture = json.loads(payload.read_text())
                    thread = normalize_thread(capture, ocr=bundle.ocr)
                    threads.append(thread)
                    thread_sources[thread.question_id] = record.id
            else:
                documents.extend(_extract_documents(record, payloads, bundle))
        except Exception as exc:
            logger.warning("extraction failed for %s: %s", record.id, exc)
    workspace.write_jsonl("docs/documents.jsonl", (d.to_dict() for d in documents))
    workspace.write_jsonl("docs/threads.jsonl", (t.to_dict() for t in threads))
    workspace.write_json("docs/thread_sources.json", thread_sources)


def _extract_documents(record: SourceRecord, payloads: list[Path], bundle: ProviderBundle) -> list[DocumentText]:
    ct = record.content_type
    if ct is ContentType.PDF_MANUAL:
        return [
            extract_pdf_text(p, bundle.pdf, doc_id=f"{record.id}:{p.stem}", source_id=record.id)
            for p in sorted(payloads)
        ]
    if ct is ContentType.WEBSITE:
        seen: set[str] = set()
        blocks: list[str] = []
        for payload in sorted(payloads):
            markdown = html_to_markdown(payload.read_text(encoding="utf-8", errors="replace"))
            key = " ".join(markdown.split()).casefold()
            if markdown.strip() and key not in seen:  # drop exact-duplicate pages
                seen.add(key)
                blocks.append(markdown)
        text = "\n\n".join(blocks).strip()
        if not text:
            return []
        from .extract import build_section_map

        return [
            DocumentText(
                doc_id=record.id, source_id=record.id, content_type=ct, text=text,
                section_map=build_section_map(text),
            )
        ]
    if ct is ContentType.NOTEBOOK:
        return [
            parse_notebook(p, doc_id=f"{record.id}:{p.stem}", source_id=record.id)
            for p in sorted(payloads)
            if p.suffix == ".ipynb"
        ]
    if ct is ContentType.R_PACKAGE:
        doc_paths = [p for p in sorted(payloads) if p.suffix.lower() in (".md", ".rmd", ".rd")]
        if not doc_paths:
            return []
        return [parse_r_docs(doc_paths, doc_id=record.id, source_id=record.id)]
    if ct in (ContentType.PYTHON_PACKAGE, ContentType.GITHUB_REPO):
        doc = consolidate_sources(
            sorted(payloads), kinds=_SOURCE_KINDS, doc_id=record.id, source_id=record.id, content_type=ct
        )
        return [doc]
    # GITHUB_README and ARTICLE payloads are already text or markdown
    from .extract import build_section_map

    blocks = [p.read_text(encoding="utf-8", errors="replace").strip() for p in sorted(payloads)]
    text = "\n\n".join(b for b in blocks if b).strip()
    if not text:
        return []
    return [
        DocumentText(
            doc_id=record.id, source_id=record.id, content_type=ct, text=text,
            section_map=build_section_map(text),
        )
    ]


def _load_documents(workspace: Workspace) -> list[DocumentText]:
    return [DocumentText.from_dict(r) for r in workspace.read_jsonl("docs/documents.jsonl")]


def _load_threads(workspace: Workspace) -> list[ThreadRecord]:
    return [ThreadRecord.from_dict(r) for r in workspace.read_jsonl("docs/threads.jsonl")]


def _run_generate(workspace: Workspace, config: PipelineConfig, bundle: ProviderBundle) -> None:
    section = config.section("generation")
    documents = _load_documents(workspace)
    threads = _load_threads(workspace)
    thread_sources: dict[str, str] = (
        workspace.read_json("docs/thread_sources.json") if workspace.path("docs/thread_sources.json").exists() else {}
    )
    records = {r.id: r for r in _load_catalog_records(workspace)}
    topics = {d.doc_id: records[d.source_id].tool_or_topic for d in documents if d.source_id in records}
    priorities = {r.id: r.priority for r in records.values()}
    pairs, batch_report = generate_qa_batch(
        [*documents, *threads],
        load_default_templates(),
        bundle.gateway,
        workers=int(section.get("workers", 12)),
        char_budget=int(section.get("char_budget", 24_000)),
        topics=topics,
        priorities=priorities,
        source_ids=thread_sources,
    )
    source_texts = {d.doc_id: d.text for d in documents}
    source_texts.update({t.question_id: t.rendered() for t in threads})
    report = generation_report(
        pairs,
        batch_report.requests,
        batch_report.valid_responses,
        embedder=bundle.embedder,
        source_texts=source_texts,
    )
    workspace.write_jsonl("qa/raw_pairs.jsonl", (p.to_dict() for p in pairs))
    workspace.write_json("qa/generation_report.json", report.to_dict())


def _cached_embedder(workspace: Workspace, bundle: ProviderBundle) -> CachingEmbedder:
    cache_path = workspace.path("cache", "embeddings.json")
    return CachingEmbedder(bundle.embedder, EmbeddingCache(cache_path))


def _curation_config(config: PipelineConfig) -> CurationConfig:
    section = config.section("curation")
    kwargs = {}
    for key in (
        "semantic_threshold",
        "min_answer_chars",
        "max_answer_tokens",
        "entailment_threshold",
        "review_band",
        "chunk_tokens",
    ):
        if key in section:
            kwargs[key] = section[key]
    if "banned_phrases" in section:
        kwargs["banned_phrases"] = tuple(section["banned_phrases"])
    return CurationConfig(**kwargs)


def _run_curate(workspace: Workspace, config: PipelineConfig, bundle: ProviderBundle) -> None:
    section = config.section("curation")
    curation_config = _curation_config(config)
    mode = DedupMode(section.get("dedup_mode", "exhaustive"))
    raw_pairs = [QaPair.from_dict(r) for r in workspace.read_jsonl("qa/raw_pairs.jsonl")]
    embedder = _cached_embedder(workspace, bundle)

    deduped = dedup_exact(raw_pairs)
    deduped = dedup_semantic(deduped, embedder, curation_config, mode=mode, seed=int(section.get("seed", 0)))
    kept, dropped = filter_rules(deduped, curation_config)
    judgments = entailment_screen(kept, bundle.nli, curation_config)
    embedder.cache.flush()

    verdict_of = {j.qa_id: j.verdict for j in judgments}
    final_pairs: list[QaPair] = []
    for pair in kept:
        verdict = verdict_of[pair.qa_id]
        if verdict is Verdict.PASS:
            final_pairs.append(pair.advance(QaStatus.ACCEPTED))
        elif verdict is Verdict.REVIEW:
            final_pairs.append(pair.advance(QaStatus.FILTERED))
        else:
            final_pairs.append(pair.advance(QaStatus.REJECTED))

    reasons: dict[str, int] = defaultdict(int)
    for _pair, reason in dropped:
        reasons[reason] += 1
    reasons["entailment_fail"] = sum(1 for p in final_pairs if p.status is QaStatus.REJECTED)
    survivors = sum(1 for p in final_pairs if p.status is not QaStatus.REJECTED)
    report = retention_report(
        [len(raw_pairs), len(deduped), len(kept), survivors],
        dict(reasons),
    )

    workspace.write_jsonl("curated/pairs.jsonl", (p.to_dict() for p in final_pairs))
    workspace.write_jsonl(
        "curated/dropped.jsonl",
        ({"qa_id": p.qa_id, "reason": reason} for p, reason in dropped),
    )
    workspace.write_jsonl("curated/judgments.jsonl", (j.to_dict() for j in judgments))
    workspace.write_json("curated/retention.json", report.to_dict())


def _load_curated(workspace: Workspace) -> list[QaPair]:
    return [QaPair.from_dict(r) for r in workspace.read_jsonl("curated/pairs.jsonl")]


def _exportable(pairs: list[QaPair]) -> list[QaPair]:
    return [p for p in pairs if p.status in (QaStatus.ACCEPTED, QaStatus.FILTERED)]


def _split_config(config: PipelineConfig) -> SplitConfig:
    section = config.section("split")
    counts = section.get("counts", {})
    ratios = section.get("ratios", {})
    return SplitConfig(
        train_count=counts.get("train"),
        val_count=counts.get("val"),
        test_count=counts.get("test"),
        train_ratio=ratios.get("train"),
        val_ratio=ratios.get("val"),
        test_ratio=ratios.get("test"),
        k_clusters=int(section.get("k_clusters", 15)),
        seed=int(section.get("seed", 0)),
        min_test_per_cluster=int(section.get("min_test_per_cluster", 1)),
    )


def _run_split(workspace: Workspace, config: PipelineConfig, bundle: ProviderBundle) -> None:
    split_config = _split_config(config)
    pairs = _exportable(_load_curated(workspace))
    if not pairs:
        raise ValueError("no curated pairs available to split")
    embedder = _cached_embedder(workspace, bundle)
    vectors = embed_corpus(pairs, embedder)
    embedder.cache.flush()
    k = min(split_config.k_clusters, len(vectors))
    assignments = cluster_corpus(vectors, k=k, seed=split_config.seed)
    groups = {p.qa_id: p.group_id for p in pairs}
    manifest = stratified_split(assignments, groups, split_config)
    manifest.audit = leakage_audit(manifest, vectors, threshold=_curation_config(config).semantic_threshold)
    save_split_manifest(workspace.path("split", "manifest.json"), manifest)
    workspace.write_jsonl(
        "split/assignments.jsonl",
        (
            {"qa_id": a.qa_id, "cluster": a.cluster, "distance": a.distance_to_centroid}
            for a in assignments
        ),
    )
    try:
        projection = project_2d(vectors)
        export_projection_csv(workspace.path("split", "projection.csv"), projection, assignments)
    except Exception as exc:
        logger.warning("2D projection skipped: %s", exc)


def _run_evaluate(workspace: Workspace, config: PipelineConfig, bundle: ProviderBundle) -> None:
    section = config.section("evaluate")
    manifest = load_split_manifest(workspace.path("split", "manifest.json"))
    pairs = _exportable(_load_curated(workspace))
    test_pairs = sorted(
        (p for p in pairs if manifest.pair_split(p.qa_id) is Split.TEST), key=lambda p: p.qa_id
    )
    if not test_pairs:
        raise ValueError("split produced no test pairs to evaluate")
    providers = MetricProviders(
        sbert=bundle.embedder,
        spacy=bundle.spacy_embedder,
        token_embedder=bundle.token_embedder,
        nli=bundle.nli,
    )
    reports: list[MetricReport] = []
    if section.get("use_gateway", True):
        run_id = section.get("run_id", "baseline-gateway")
        examples = [
            EvalExample(p.qa_id, p.question, p.answer, bundle.gateway.complete(p.question))
            for p in test_pairs
        ]
        reports.append(evaluate_run(run_id, examples, providers))
    for run_cfg in section.get("runs", []):
        candidates = {}
        with open(run_cfg["candidates"], encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    row = json.loads(line)
                    candidates[row["qa_id"]] = row["candidate"]
        examples = [
            EvalExample(p.qa_id, p.question, p.answer, candidates.get(p.qa_id, ""))
            for p in test_pairs
        ]
        reports.append(evaluate_run(run_cfg["run_id"], examples, providers))
    for report in reports:
        out_dir = workspace.ensure_dir("eval", report.run_id)
        (out_dir / "report.json").write_text(report.to_json() + "\n")
        workspace.write_json(f"eval/{report.run_id}/aggregate.json", report.aggregate)
        report.write_per_example_csv(out_dir / "per_example.csv")
    baseline_ids = section.get("baselines", [])
    model_ids = section.get("models", [])
    by_id = {r.run_id: r for r in reports}
    if baseline_ids and model_ids and all(r in by_id for r in (*baseline_ids, *model_ids)):
        table = compare_runs([by_id[r] for r in baseline_ids], [by_id[r] for r in model_ids])
        table.to_csv(workspace.path("eval", "comparison.csv"))


def _run_report(workspace: Workspace, config: PipelineConfig, bundle: ProviderBundle) -> None:
    threads = _load_threads(workspace)
    pairs = _exportable(_load_curated(workspace))
    assignments = [
        ClusterAssignment(r["qa_id"], int(r["cluster"]), float(r["distance"]))
        for r in workspace.read_jsonl("split/assignments.jsonl")
    ]
    report = analytics.build_eda_report(
        threads,
        texts=[p.answer for p in pairs],
        assignments=assignments,
        pairs=pairs,
    )
    retention = workspace.read_json("curated/retention.json")
    split_manifest = load_split_manifest(workspace.path("split", "manifest.json"))
    sizes = {s.value: n for s, n in split_manifest.split_sizes().items()}
    payload = {"eda": report.to_dict(), "retention": retention, "split_sizes": sizes}
    workspace.write_json("report/report.json", payload)
    _write_csv(workspace.path("report", "tags.csv"), ["tag", "count"], sorted(report.tag_counts.items()))
    _write_csv(
        workspace.path("report", "cluster_sizes.csv"),
        ["cluster", "size"],
        sorted(report.cluster_sizes.items()),
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    import csv

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow(list(row))


def export_dataset(
    manifest: SplitManifest,
    pairs: list[QaPair],
    decisions: dict[str, ReviewDecision],
    out: Path | str,
    strict: bool = False,
) -> dict:
    """Write train/val/test JSONL honoring review decisions.

    Reject excludes the pair, Edit replaces its answer, unreviewed Review
    items export flagged as unreviewed (or fail the export in strict mode).
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows: dict[Split, list[dict]] = {s: [] for s in Split}
    unreviewed: list[str] = []
    for pair in sorted(_exportable(pairs), key=lambda p: p.qa_id):
        split = manifest.pair_split(pair.qa_id)
        if split is None:
            continue
        decision = decisions.get(pair.qa_id)
        answer = pair.answer
        flagged = False
        if decision is not None:
            if decision.decision is Decision.REJECT:
                continue
            if decision.decision is Decision.EDIT and decision.edited_answer:
                answer = decision.edited_answer
        elif pair.status is QaStatus.FILTERED:
            unreviewed.append(pair.qa_id)
            flagged = True
        row = {
            "qa_id": pair.qa_id,
            "group_id": pair.group_id,
            "question": pair.question,
            "answer": answer,
            "source_id": pair.source_id,
            "content_type": pair.content_type.value,
            "cluster": manifest.group_cluster.get(pair.group_id),
        }
        if flagged:
            row["unreviewed"] = True
        rows[split].append(row)
    if strict and unreviewed:
        raise UnreviewedItemsRemain(f"{len(unreviewed)} review-band items lack decisions")
    counts = {}
    for split in Split:
        path = out / f"{split.value}.jsonl"
        with open(path, "w", encoding="utf-8") as handle:
            for row in rows[split]:
                handle.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
        counts[split.value] = len(rows[split])
    summary = {"counts": counts, "unreviewed_flagged": len(unreviewed)}
    (out / "export_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _run_export(workspace: Workspace, config: PipelineConfig, bundle: ProviderBundle) -> None:
    section = config.section("export")
    manifest = load_split_manifest(workspace.path("split", "manifest.json"))
    pairs = _load_curated(workspace)
    decisions = DecisionLog(workspace.path("review", "decisions.jsonl")).replay()
    export_dataset(
        manifest,
        pairs,
        decisions,
        workspace.path("export"),
        strict=bool(section.get("strict", False)),
    )
    emit_finetune_config(config.section("finetune").get("overrides", {}), workspace.path("finetune", "config.json"))


_STAGE_RUNNERS: dict[str, Callable[[Workspace, PipelineConfig, ProviderBundle], None]] = {
    "catalog": _run_catalog,
    "fetch": _run_fetch,
    "extract": _run_extract,
    "generate": _run_generate,
    "curate": _run_curate,
    "split": _run_split,
    "evaluate": _run_evaluate,
    "report": _run_report,
    "export": _run_export,
}
