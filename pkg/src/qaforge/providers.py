"""Provider interfaces and the offline implementations shipped with the toolkit.

External models (generation, embeddings, NLI, OCR, PDF conversion) are reached
through these small protocols. The offline implementations are deterministic,
so every stage runs end to end without network access or model weights; real
backends plug in through the same surface.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from .errors import GatewayExhausted
from .textutil import lexical_tokens

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Protocols
# ---------------------------------------------------------------------------

@runtime_checkable
class EmbeddingProvider(Protocol):
    model_tag: str
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


@runtime_checkable
class TokenEmbeddingProvider(Protocol):
    model_tag: str
    dim: int

    def embed_token(self, token: str) -> np.ndarray | None: ...


@runtime_checkable
class EntailmentProvider(Protocol):
    def entail_probability(self, premise: str, hypothesis: str) -> float: ...


@runtime_checkable
class LlmGateway(Protocol):
    def complete(self, prompt: str) -> str: ...


@runtime_checkable
class PdfTextProvider(Protocol):
    def extract_text(self, path: Path) -> str: ...


@runtime_checkable
class OcrProvider(Protocol):
    def image_to_text(self, ref: str) -> str: ...


@runtime_checkable
class TokenCounter(Protocol):
    def count(self, text: str) -> int: ...


# ---------------------------------------------------------------------------
# Deterministic offline providers
# ---------------------------------------------------------------------------

def _token_vector(token: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


class HashingEmbedder:
    """Feature-hashed bag-of-tokens document embeddings.

    Texts sharing tokens get proportionally similar vectors, which is all the
    dedup/cluster machinery needs at desk scale.
    """

    def __init__(self, dim: int = 64, model_tag: str = "feature-hash-v1"):
        self.dim = dim
        self.model_tag = model_tag
        self._token_cache: dict[str, np.ndarray] = {}

    def _tok(self, token: str) -> np.ndarray:
        hit = self._token_cache.get(token)
        if hit is None:
            hit = self._token_cache[token] = _token_vector(token, self.dim)
        return hit

    def embed(self, text: str) -> np.ndarray:
        tokens = lexical_tokens(text)
        if not tokens:
            return np.zeros(self.dim)
        acc = np.zeros(self.dim)
        for t in tokens:
            acc += self._tok(t)
        norm = float(np.linalg.norm(acc))
        return acc if norm == 0.0 else acc / norm


class HashingTokenEmbedder:
    """Per-token deterministic unit vectors; the offline ground space for WMD."""

    def __init__(self, dim: int = 32, model_tag: str = "token-hash-v1"):
        self.dim = dim
        self.model_tag = model_tag
        self._cache: dict[str, np.ndarray] = {}

    def embed_token(self, token: str) -> np.ndarray | None:
        hit = self._cache.get(token)
        if hit is None:
            hit = self._cache[token] = _token_vector(token, self.dim)
        return hit


class MeanTokenEmbedder:
    """Document vector = mean of token vectors (spaCy-style doc similarity)."""

    def __init__(self, token_embedder: TokenEmbeddingProvider | None = None, dim: int = 32):
        self.token_embedder = token_embedder or HashingTokenEmbedder(dim=dim)
        self.dim = self.token_embedder.dim
        self.model_tag = f"mean-of-{self.token_embedder.model_tag}"

    def embed(self, text: str) -> np.ndarray:
        vectors = []
        for token in lexical_tokens(text):
            vec = self.token_embedder.embed_token(token)
            if vec is not None:
                vectors.append(vec)
        if not vectors:
            return np.zeros(self.dim)
        return np.mean(vectors, axis=0)


_STOPWORDS = frozenset(
    "a about an and are as at be by do does for from how in is it of on or "
    "source state that the this to was what when where which who why with "
    "you your".split()
)


class OverlapEntailment:
    """Lexical containment stand-in for an NLI model.

    Probability = fraction of the hypothesis' content tokens present in the
    premise. Crude, deterministic, and directional, which is what the quality
    gate and tests need offline.
    """

    def entail_probability(self, premise: str, hypothesis: str) -> float:
        hyp = [t for t in lexical_tokens(hypothesis) if t not in _STOPWORDS]
        if not hyp:
            return 0.0
        premise_tokens = set(lexical_tokens(premise))
        hit = sum(1 for t in hyp if t in premise_tokens)
        return hit / len(hyp)


class WhitespacePunctTokenCounter:
    def count(self, text: str) -> int:
        from .textutil import count_tokens

        return count_tokens(text)


class PassthroughPdfText:
    """Reads the payload as UTF-8 text; fixture-level converter."""

    def extract_text(self, path: Path) -> str:
        return Path(path).read_text(encoding="utf-8", errors="replace")


class CommandPdfText:
    """Shells out to an external converter, e.g. ``pdftotext {pdf} {txt}``."""

    def __init__(self, command_template: str):
        self.command_template = command_template

    def extract_text(self, path: Path) -> str:
        import subprocess
        import tempfile

        with tempfile.NamedTemporaryFile(suffix=".txt", delete=False) as handle:
            out_path = Path(handle.name)
        cmd = self.command_template.format(pdf=str(path), txt=str(out_path))
        subprocess.run(cmd, shell=True, check=True, capture_output=True)
        try:
            return out_path.read_text(encoding="utf-8", errors="replace")
        finally:
            out_path.unlink(missing_ok=True)


_SENTENCE_RE = re.compile(r"[^.!?\n]+[.!?]?")
_DOC_MARKER_RE = re.compile(r"^[A-Z]+:\s*$", re.MULTILINE)


class OfflineGateway:
    """Deterministic generation backend for dry runs and desk-scale pipelines.

    QA-generation prompts produce a JSON array of question/answer objects
    derived from the longest sentences of the document body, taken as the
    text after the final ALL-CAPS "LABEL:" line (the convention the shipped
    templates follow; without a marker the whole prompt counts). Any other
    prompt gets its longest sentence echoed back, which is enough to exercise
    the evaluation stage.
    """

    def __init__(self, pairs_per_request: int = 3):
        self.pairs_per_request = pairs_per_request
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        body = prompt
        markers = list(_DOC_MARKER_RE.finditer(prompt))
        if markers:
            body = prompt[markers[-1].end():]
        sentences = [s.strip() for s in _SENTENCE_RE.findall(body) if len(s.strip()) >= 30]
        sentences.sort(key=lambda s: (-len(s), s))
        if "question" not in prompt or "answer" not in prompt:
            return sentences[0] if sentences else prompt.strip()
        pairs = []
        for sent in sentences[: self.pairs_per_request]:
            content = [t for t in lexical_tokens(sent) if t not in _STOPWORDS][:6]
            phrase = " ".join(content) if content else sent[:40]
            pairs.append({"question": f"What does the source state about {phrase}?", "answer": sent})
        return json.dumps(pairs)


# ---------------------------------------------------------------------------
# HTTP gateway with retry/backoff and a token bucket
# ---------------------------------------------------------------------------

@dataclass
class TokenBucket:
    rate_per_sec: float
    capacity: float
    _tokens: float = field(init=False)
    _last: float = field(init=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False)

    def __post_init__(self) -> None:
        self._tokens = self.capacity
        self._last = time.monotonic()

    def acquire(self, sleep: Callable[[float], None] = time.sleep) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate_per_sec)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate_per_sec
            sleep(wait)


class HttpGateway:
    """JSON-over-HTTP completion client with bounded retries.

    Request/response bodies are logged under ``log_dir`` with the API key
    redacted. The transport is injectable so tests never touch the network.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "QAFORGE_API_KEY",
        attempts: int = 3,
        backoff_base: float = 1.0,
        rate_per_sec: float = 2.0,
        log_dir: Path | None = None,
        transport: Callable[[str, dict], dict] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.attempts = attempts
        self.backoff_base = backoff_base
        self.bucket = TokenBucket(rate_per_sec=rate_per_sec, capacity=max(1.0, rate_per_sec))
        self.log_dir = log_dir
        self.transport = transport or self._http_post
        self.sleep = sleep
        self._seq = 0
        self._lock = threading.Lock()

    def _http_post(self, endpoint: str, body: dict) -> dict:
        import os

        import httpx

        headers = {"Authorization": f"Bearer {os.environ.get(self.api_key_env, '')}"}
        response = httpx.post(endpoint, json=body, headers=headers, timeout=120.0)
        response.raise_for_status()
        return response.json()

    def _log(self, record: dict) -> None:
        if self.log_dir is None:
            return
        with self._lock:
            self._seq += 1
            seq = self._seq
        self.log_dir.mkdir(parents=True, exist_ok=True)
        (self.log_dir / f"request-{seq:06d}.json").write_text(json.dumps(record, indent=2))

    def complete(self, prompt: str) -> str:
        body = {"model": self.model, "prompt": prompt}
        last_error: Exception | None = None
        for attempt in range(self.attempts):
            self.bucket.acquire(self.sleep)
            try:
                payload = self.transport(self.endpoint, body)
                text = payload["text"] if isinstance(payload, dict) else str(payload)
                self._log({"model": self.model, "prompt": prompt, "response": text, "api_key": "<redacted>"})
                return text
            except Exception as exc:
                last_error = exc
                logger.warning("gateway attempt %d/%d failed: %s", attempt + 1, self.attempts, exc)
                if attempt + 1 < self.attempts:
                    self.sleep(self.backoff_base * (2**attempt))
        self._log({"model": self.model, "prompt": prompt, "error": str(last_error), "api_key": "<redacted>"})
        raise GatewayExhausted(f"all {self.attempts} attempts failed: {last_error}")
