"""Embedding vectors, cosine similarity, and the provider-call cache."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmbedderFailure


@dataclass
class EmbeddingVector:
    values: np.ndarray
    model_tag: str

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    return v if n == 0.0 else v / n


def content_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class EmbeddingCache:
    """Disk-backed cache keyed by (model_tag, content hash).

    Reruns over the same corpus skip provider calls entirely.
    """

    path: Path | None = None
    _mem: dict[tuple[str, str], list[float]] = field(default_factory=dict)
    _dirty: bool = False

    def __post_init__(self) -> None:
        if self.path is not None and self.path.exists():
            raw = json.loads(self.path.read_text())
            for tag, entries in raw.items():
                for key, values in entries.items():
                    self._mem[(tag, key)] = values

    def get(self, model_tag: str, text: str) -> np.ndarray | None:
        hit = self._mem.get((model_tag, content_key(text)))
        return None if hit is None else np.asarray(hit, dtype=float)

    def put(self, model_tag: str, text: str, values: np.ndarray) -> None:
        self._mem[(model_tag, content_key(text))] = [float(x) for x in values]
        self._dirty = True

    def flush(self) -> None:
        if self.path is None or not self._dirty:
            return
        grouped: dict[str, dict[str, list[float]]] = {}
        for (tag, key), values in self._mem.items():
            grouped.setdefault(tag, {})[key] = values
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(grouped, sort_keys=True))
        self._dirty = False


class CachingEmbedder:
    """Wraps any embedding provider with the (model_tag, content hash) cache."""

    def __init__(self, provider, cache: EmbeddingCache | None = None):
        self.provider = provider
        self.cache = cache or EmbeddingCache()
        self.provider_calls = 0

    @property
    def model_tag(self) -> str:
        return self.provider.model_tag

    @property
    def dim(self) -> int:
        return self.provider.dim

    def embed(self, text: str) -> np.ndarray:
        cached = self.cache.get(self.provider.model_tag, text)
        if cached is not None:
            return cached
        try:
            values = np.asarray(self.provider.embed(text), dtype=float)
        except Exception as exc:  # provider failures carry context upward
            raise EmbedderFailure(str(exc)) from exc
        self.provider_calls += 1
        self.cache.put(self.provider.model_tag, text, values)
        return values
