"""Request/response models for the review and pipeline HTTP API."""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class ReviewItemOut(BaseModel):
    qa_id: str
    question: str
    answer: str
    aggregate_entailment: float
    cluster: Optional[int] = None
    source_id: str = ""
    revision: int = 0


class QueueOut(BaseModel):
    items: list[ReviewItemOut]
    page: int
    page_size: int
    remaining: int


class DecisionIn(BaseModel):
    decision: Literal["accept", "reject", "edit"]
    reviewer: str = Field(min_length=1)
    expected_revision: int = 0
    edited_answer: Optional[str] = None


class DecisionOut(BaseModel):
    qa_id: str
    decision: str
    reviewer: str
    decided_at: str
    revision: int
    edited_answer: Optional[str] = None


class ReviewCountsOut(BaseModel):
    queue_remaining: int
    decided: int
    accepted: int
    rejected: int
    edited: int


class StatsOut(BaseModel):
    retention: Optional[dict] = None
    split_sizes: Optional[dict] = None
    generation: Optional[dict] = None
    review: ReviewCountsOut
    export_counts: Optional[dict] = None


class StageStateOut(BaseModel):
    stage: str
    state: str
    output_hash: str = ""
    finished_at: str = ""


class StageRunIn(BaseModel):
    force: bool = False


class ErrorBody(BaseModel):
    error: str
    detail: str
