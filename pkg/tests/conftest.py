from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


class MapEmbedder:
    """Document embedder backed by an explicit text -> vector map."""

    def __init__(self, mapping: dict[str, np.ndarray], dim: int, model_tag: str = "map-v1"):
        self.mapping = {k: np.asarray(v, dtype=float) for k, v in mapping.items()}
        self.dim = dim
        self.model_tag = model_tag
        self.calls = 0

    def embed(self, text: str) -> np.ndarray:
        self.calls += 1
        if text not in self.mapping:
            raise KeyError(f"no vector for {text!r}")
        return self.mapping[text]


class MapTokenEmbedder:
    """Token embedder backed by an explicit token -> vector map."""

    def __init__(self, mapping: dict[str, tuple], model_tag: str = "tok-map-v1"):
        self.mapping = {k: np.asarray(v, dtype=float) for k, v in mapping.items()}
        self.dim = len(next(iter(self.mapping.values()))) if self.mapping else 0
        self.model_tag = model_tag

    def embed_token(self, token: str):
        return self.mapping.get(token)


class ConstEntailment:
    def __init__(self, probability: float):
        self.probability = probability

    def entail_probability(self, premise: str, hypothesis: str) -> float:
        return self.probability


class ScriptedEntailment:
    """Returns probabilities keyed by premise substring, else a default."""

    def __init__(self, by_substring: dict[str, float], default: float = 0.0):
        self.by_substring = by_substring
        self.default = default

    def entail_probability(self, premise: str, hypothesis: str) -> float:
        for needle, prob in self.by_substring.items():
            if needle in premise:
                return prob
        return self.default


@pytest.fixture
def hashing_embedder():
    from qaforge.providers import HashingEmbedder

    return HashingEmbedder(dim=48)


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {name}: {outcome} ({report.duration:.2f}s)")
