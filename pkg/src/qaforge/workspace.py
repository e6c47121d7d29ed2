"""Resumable workspace: directory layout, manifest, hashing, locking."""
from __future__ import annotations

import hashlib
import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

from filelock import FileLock, Timeout

from .errors import WorkspaceLocked

MANIFEST_NAME = "manifest.json"


class StageState(str, Enum):
    NOT_RUN = "not_run"
    DONE = "done"
    STALE = "stale"


@dataclass
class StageEntry:
    state: StageState = StageState.NOT_RUN
    input_hash: str = ""
    output_hash: str = ""
    finished_at: str = ""

    def to_dict(self) -> dict:
        return {
            "state": self.state.value,
            "input_hash": self.input_hash,
            "output_hash": self.output_hash,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "StageEntry":
        return cls(
            state=StageState(raw.get("state", "not_run")),
            input_hash=raw.get("input_hash", ""),
            output_hash=raw.get("output_hash", ""),
            finished_at=raw.get("finished_at", ""),
        )


@dataclass
class WorkspaceManifest:
    stages: dict[str, StageEntry] = field(default_factory=dict)
    config_hash: str = ""
    run_log: list[dict] = field(default_factory=list)

    def entry(self, stage: str) -> StageEntry:
        return self.stages.setdefault(stage, StageEntry())

    def log(self, event: str, stage: str, detail: str = "", clock: Callable[[], datetime] | None = None) -> None:
        now = (clock or (lambda: datetime.now(timezone.utc)))()
        self.run_log.append({"at": now.isoformat(), "event": event, "stage": stage, "detail": detail})

    def to_dict(self) -> dict:
        return {
            "stages": {name: entry.to_dict() for name, entry in self.stages.items()},
            "config_hash": self.config_hash,
            "run_log": self.run_log,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "WorkspaceManifest":
        return cls(
            stages={name: StageEntry.from_dict(entry) for name, entry in raw.get("stages", {}).items()},
            config_hash=raw.get("config_hash", ""),
            run_log=raw.get("run_log", []),
        )


def canonical_hash(payload: Any) -> str:
    """Stable hash of any JSON-serializable payload."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Workspace:
    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # -- paths --------------------------------------------------------------
    def path(self, *parts: str) -> Path:
        return self.root.joinpath(*parts)

    def ensure_dir(self, *parts: str) -> Path:
        p = self.path(*parts)
        p.mkdir(parents=True, exist_ok=True)
        return p

    # -- json / jsonl -------------------------------------------------------
    def write_json(self, rel: str, payload: Any) -> Path:
        p = self.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return p

    def read_json(self, rel: str) -> Any:
        return json.loads(self.path(rel).read_text())

    def write_jsonl(self, rel: str, rows: Iterable[dict]) -> Path:
        p = self.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
        return p

    def read_jsonl(self, rel: str) -> list[dict]:
        p = self.path(rel)
        if not p.exists():
            return []
        out = []
        with open(p, encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out

    # -- manifest -----------------------------------------------------------
    def load_manifest(self) -> WorkspaceManifest:
        p = self.path(MANIFEST_NAME)
        if not p.exists():
            return WorkspaceManifest()
        return WorkspaceManifest.from_dict(json.loads(p.read_text()))

    def save_manifest(self, manifest: WorkspaceManifest) -> None:
        self.write_json(MANIFEST_NAME, manifest.to_dict())

    # -- hashing ------------------------------------------------------------
    def tree_hash(self, *rel_dirs: str, exclude: tuple[str, ...] = ("_fetch_manifest.json",)) -> str:
        """Order-stable digest of every file under the given subdirectories."""
        digest = hashlib.sha256()
        for rel in rel_dirs:
            base = self.path(rel)
            if not base.exists():
                continue
            if base.is_file():
                digest.update(str(rel).encode())
                digest.update(base.read_bytes())
                continue
            for path in sorted(p for p in base.rglob("*") if p.is_file()):
                if path.name in exclude:
                    continue
                digest.update(str(path.relative_to(self.root)).encode())
                digest.update(path.read_bytes())
        return digest.hexdigest()

    # -- locking ------------------------------------------------------------
    @contextmanager
    def lock(self, timeout: float = 0.0) -> Iterator[None]:
        lock = FileLock(str(self.path(".lock")))
        try:
            lock.acquire(timeout=timeout)
        except Timeout as exc:
            raise WorkspaceLocked(f"workspace {self.root} is locked by another run") from exc
        try:
            yield
        finally:
            lock.release()
