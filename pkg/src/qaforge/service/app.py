"""FastAPI service wrapping a pipeline workspace.

Serves the manual-review queue, decision recording with optimistic
concurrency, workspace statistics, export reads, and synchronous stage
execution. Reads are lock-free snapshots of the persisted state; decision
writes go through the append-only log's revision check.
"""
from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from ..curation import EntailmentJudgment, QaPair
from ..errors import (
    QaForgeError,
    RevisionConflict,
    StageFailure,
    UnknownQaId,
    UnreviewedItemsRemain,
    UpstreamStale,
    WorkspaceLocked,
)
from ..pipeline import STAGES, PipelineConfig, build_providers, run_stage
from ..review import Decision, DecisionLog, ReviewItem, review_queue
from ..workspace import Workspace
from .schemas import (
    DecisionIn,
    DecisionOut,
    QueueOut,
    ReviewCountsOut,
    ReviewItemOut,
    StageRunIn,
    StageStateOut,
    StatsOut,
)

logger = logging.getLogger(__name__)

_STATUS_BY_ERROR = {
    UnknownQaId: 404,
    RevisionConflict: 409,
    UpstreamStale: 409,
    WorkspaceLocked: 423,
    UnreviewedItemsRemain: 409,
    StageFailure: 500,
}


class _WorkspaceView:
    """Read helpers over the persisted pipeline outputs."""

    def __init__(self, workspace: Workspace):
        self.workspace = workspace
        self.decision_log = DecisionLog(workspace.path("review", "decisions.jsonl"))

    def pairs(self) -> list[QaPair]:
        return [QaPair.from_dict(r) for r in self.workspace.read_jsonl("curated/pairs.jsonl")]

    def judgments(self) -> list[EntailmentJudgment]:
        return [EntailmentJudgment.from_dict(r) for r in self.workspace.read_jsonl("curated/judgments.jsonl")]

    def clusters(self) -> dict[str, int]:
        return {
            r["qa_id"]: int(r["cluster"])
            for r in self.workspace.read_jsonl("split/assignments.jsonl")
        }

    def queue(self, cluster: int | None, source: str | None, page: int, page_size: int) -> tuple[list[ReviewItem], int]:
        decisions = self.decision_log.replay()
        items = review_queue(
            self.judgments(),
            self.pairs(),
            decisions,
            cluster_of=self.clusters(),
            cluster=cluster,
            source=source,
            page=1,
            page_size=10**9,
        )
        start = (max(page, 1) - 1) * page_size
        return items[start : start + page_size], len(items)

    def queue_item(self, qa_id: str) -> ReviewItem:
        items, _total = self.queue(cluster=None, source=None, page=1, page_size=10**9)
        for item in items:
            if item.qa_id == qa_id:
                decisions = self.decision_log.replay()
                item.revision = decisions[qa_id].revision if qa_id in decisions else 0
                return item
        raise UnknownQaId(f"{qa_id} is not in the review queue")


def create_app(workspace_root: Path | str, config_path: Path | str | None = None) -> FastAPI:
    app = FastAPI(title="qaforge review service", version="0.1.0")
    workspace = Workspace(workspace_root)
    view = _WorkspaceView(workspace)
    config = PipelineConfig.from_file(config_path) if config_path else None

    @app.exception_handler(QaForgeError)
    async def _domain_error(_request: Request, exc: QaForgeError):
        status = _STATUS_BY_ERROR.get(type(exc), 400)
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/review/queue", response_model=QueueOut)
    def get_queue(
        page: int = Query(default=1, ge=1),
        page_size: int = Query(default=50, ge=1, le=500),
        cluster: int | None = None,
        source: str | None = None,
    ):
        items, total = view.queue(cluster, source, page, page_size)
        return QueueOut(
            items=[ReviewItemOut(**item.to_dict()) for item in items],
            page=page,
            page_size=page_size,
            remaining=total,
        )

    @app.get("/review/{qa_id}", response_model=ReviewItemOut)
    def get_item(qa_id: str):
        return ReviewItemOut(**view.queue_item(qa_id).to_dict())

    @app.post("/review/{qa_id}/decision", response_model=DecisionOut)
    def post_decision(qa_id: str, body: DecisionIn):
        if body.decision == "edit" and not (body.edited_answer or "").strip():
            return JSONResponse(
                status_code=400,
                content={"error": "ValidationError", "detail": "edit decision needs edited_answer"},
            )
        known = {j.qa_id for j in view.judgments()}
        stored = view.decision_log.record(
            qa_id,
            Decision(body.decision),
            reviewer=body.reviewer,
            expected_revision=body.expected_revision,
            edited_answer=body.edited_answer,
            known_qa_ids=known,
        )
        return DecisionOut(**stored.to_dict())

    @app.get("/stats", response_model=StatsOut)
    def get_stats():
        retention = None
        if workspace.path("curated/retention.json").exists():
            retention = workspace.read_json("curated/retention.json")
        split_sizes = None
        if workspace.path("split/manifest.json").exists():
            from ..split import load_manifest

            manifest = load_manifest(workspace.path("split/manifest.json"))
            split_sizes = {s.value: n for s, n in manifest.split_sizes().items()}
        generation = None
        if workspace.path("qa/generation_report.json").exists():
            generation = workspace.read_json("qa/generation_report.json")
        export_counts = None
        if workspace.path("export/export_summary.json").exists():
            export_counts = workspace.read_json("export/export_summary.json")["counts"]
        decisions = view.decision_log.replay()
        _, remaining = view.queue(cluster=None, source=None, page=1, page_size=1)
        tally = {d.value: 0 for d in Decision}
        for decision in decisions.values():
            tally[decision.decision.value] += 1
        return StatsOut(
            retention=retention,
            split_sizes=split_sizes,
            generation=generation,
            export_counts=export_counts,
            review=ReviewCountsOut(
                queue_remaining=remaining,
                decided=len(decisions),
                accepted=tally["accept"],
                rejected=tally["reject"],
                edited=tally["edit"],
            ),
        )

    @app.get("/export/{split}")
    def get_export(split: str):
        if split not in ("train", "val", "test"):
            return JSONResponse(status_code=404, content={"error": "NotFound", "detail": f"unknown split {split!r}"})
        path = workspace.path("export", f"{split}.jsonl")
        if not path.exists():
            return JSONResponse(status_code=404, content={"error": "NotFound", "detail": "export stage has not run"})
        import json as _json

        rows = [_json.loads(line) for line in path.read_text().splitlines() if line.strip()]
        return rows

    @app.get("/stages", response_model=list[StageStateOut])
    def get_stages():
        manifest = workspace.load_manifest()
        return [
            StageStateOut(
                stage=stage,
                state=manifest.entry(stage).state.value,
                output_hash=manifest.entry(stage).output_hash,
                finished_at=manifest.entry(stage).finished_at,
            )
            for stage in STAGES
        ]

    @app.post("/stages/{stage}/run", response_model=StageStateOut)
    def post_stage_run(stage: str, body: StageRunIn | None = None):
        if config is None:
            return JSONResponse(
                status_code=400,
                content={"error": "NoConfig", "detail": "service started without --config; stage runs disabled"},
            )
        if stage not in STAGES:
            return JSONResponse(status_code=404, content={"error": "NotFound", "detail": f"unknown stage {stage!r}"})
        providers = build_providers(config, workspace)
        entry = run_stage(stage, config, workspace, providers, force=bool(body and body.force))
        return StageStateOut(
            stage=stage, state=entry.state.value, output_hash=entry.output_hash, finished_at=entry.finished_at
        )

    _mount_frontend(app)
    return app


def _mount_frontend(app: FastAPI) -> None:
    """Serve the review UI bundle when a built frontend sits next to the repo."""
    for candidate in (Path("frontend/dist"), Path(__file__).resolve().parents[3] / "frontend" / "dist"):
        if candidate.is_dir():
            from fastapi.staticfiles import StaticFiles

            app.mount("/ui", StaticFiles(directory=str(candidate), html=True), name="ui")
            return
