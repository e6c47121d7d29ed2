"""Manual-review queue and the append-only decision log."""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from .curation import EntailmentJudgment, QaPair, Verdict
from .errors import RevisionConflict, UnknownQaId

DEFAULT_PAGE_SIZE = 50


class Decision(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    EDIT = "edit"


@dataclass
class ReviewDecision:
    qa_id: str
    decision: Decision
    reviewer: str
    decided_at: str
    revision: int
    edited_answer: str | None = None

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "decision": self.decision.value,
            "reviewer": self.reviewer,
            "decided_at": self.decided_at,
            "revision": self.revision,
            "edited_answer": self.edited_answer,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ReviewDecision":
        return cls(
            qa_id=raw["qa_id"],
            decision=Decision(raw["decision"]),
            reviewer=raw["reviewer"],
            decided_at=raw["decided_at"],
            revision=int(raw["revision"]),
            edited_answer=raw.get("edited_answer"),
        )


@dataclass
class ReviewItem:
    qa_id: str
    question: str
    answer: str
    aggregate_entailment: float
    cluster: int | None = None
    source_id: str = ""
    revision: int = 0

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "question": self.question,
            "answer": self.answer,
            "aggregate_entailment": self.aggregate_entailment,
            "cluster": self.cluster,
            "source_id": self.source_id,
            "revision": self.revision,
        }


class DecisionLog:
    """Append-only decision store with optimistic revision checks.

    Replaying the log reconstructs current state; the latest record per qa_id
    wins and revisions increase strictly.
    """

    def __init__(self, path: Path | str, clock: Callable[[], datetime] | None = None):
        self.path = Path(path)
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self._lock = threading.Lock()

    def replay(self) -> dict[str, ReviewDecision]:
        current: dict[str, ReviewDecision] = {}
        if not self.path.exists():
            return current
        with open(self.path, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    decision = ReviewDecision.from_dict(json.loads(line))
                    current[decision.qa_id] = decision
        return current

    def record(
        self,
        qa_id: str,
        decision: Decision,
        reviewer: str,
        expected_revision: int,
        edited_answer: str | None = None,
        known_qa_ids: set[str] | None = None,
    ) -> ReviewDecision:
        if decision is Decision.EDIT and not (edited_answer or "").strip():
            raise ValueError("edit decision needs a non-empty replacement answer")
        with self._lock:
            current = self.replay()
            prior = current.get(qa_id)
            if prior is None and known_qa_ids is not None and qa_id not in known_qa_ids:
                raise UnknownQaId(f"{qa_id} is not in the review queue and has no prior decision")
            current_revision = prior.revision if prior else 0
            if expected_revision != current_revision:
                raise RevisionConflict(
                    f"{qa_id}: expected revision {expected_revision}, log is at {current_revision}"
                )
            stored = ReviewDecision(
                qa_id=qa_id,
                decision=decision,
                reviewer=reviewer,
                decided_at=self.clock().isoformat(),
                revision=current_revision + 1,
                edited_answer=edited_answer,
            )
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(stored.to_dict(), sort_keys=True) + "\n")
            return stored


def review_queue(
    judgments: Sequence[EntailmentJudgment],
    pairs: Sequence[QaPair],
    decisions: dict[str, ReviewDecision],
    cluster_of: dict[str, int] | None = None,
    cluster: int | None = None,
    source: str | None = None,
    page: int = 1,
    page_size: int = DEFAULT_PAGE_SIZE,
) -> list[ReviewItem]:
    """Undecided Review-verdict items, ordered by (aggregate, qa_id)."""
    by_id = {p.qa_id: p for p in pairs}
    items: list[ReviewItem] = []
    for judgment in judgments:
        if judgment.verdict is not Verdict.REVIEW:
            continue
        if judgment.qa_id in decisions:
            continue
        pair = by_id.get(judgment.qa_id)
        if pair is None:
            continue
        item_cluster = (cluster_of or {}).get(judgment.qa_id)
        if cluster is not None and item_cluster != cluster:
            continue
        if source is not None and pair.source_id != source:
            continue
        items.append(
            ReviewItem(
                qa_id=judgment.qa_id,
                question=pair.question,
                answer=pair.answer,
                aggregate_entailment=judgment.aggregate,
                cluster=item_cluster,
                source_id=pair.source_id,
            )
        )
    items.sort(key=lambda item: (item.aggregate_entailment, item.qa_id))
    start = (max(page, 1) - 1) * page_size
    return items[start : start + page_size]
