"""Corpus embedding, clustering, leak-free stratified splitting, 2D projection."""
from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .curation import QaPair
from .embedding import EmbedderFailure, unit
from .errors import DegenerateVariance, InfeasibleConfig, KTooLarge

logger = logging.getLogger(__name__)


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass
class SplitConfig:
    train_count: int | None = None
    val_count: int | None = None
    test_count: int | None = None
    train_ratio: float | None = None
    val_ratio: float | None = None
    test_ratio: float | None = None
    k_clusters: int = 15
    seed: int = 0
    min_test_per_cluster: int = 1

    def __post_init__(self) -> None:
        if self.k_clusters < 1:
            raise ValueError("k_clusters must be >= 1")

    def resolve_counts(self, corpus_pairs: int) -> dict[Split, int]:
        """Pair-count targets per split; ratios apportioned by largest remainder."""
        if self.train_count is not None or self.val_count is not None or self.test_count is not None:
            counts = {
                Split.TRAIN: self.train_count or 0,
                Split.VAL: self.val_count or 0,
                Split.TEST: self.test_count or 0,
            }
        else:
            ratios = [self.train_ratio or 0.0, self.val_ratio or 0.0, self.test_ratio or 0.0]
            if sum(ratios) <= 0:
                raise InfeasibleConfig("no counts or ratios configured")
            scale = corpus_pairs / sum(ratios)
            alloc = largest_remainder([r * scale for r in ratios], corpus_pairs)
            counts = {Split.TRAIN: alloc[0], Split.VAL: alloc[1], Split.TEST: alloc[2]}
        if sum(counts.values()) > corpus_pairs:
            raise InfeasibleConfig(
                f"requested {sum(counts.values())} pairs from a corpus of {corpus_pairs}"
            )
        return counts


@dataclass
class ClusterAssignment:
    qa_id: str
    cluster: int
    distance_to_centroid: float


@dataclass
class SplitManifest:
    assignments: dict[str, Split]
    per_cluster_counts: dict[int, dict[str, int]]
    config_echo: SplitConfig
    audit: dict = field(default_factory=dict)
    group_members: dict[str, list[str]] = field(default_factory=dict)
    group_cluster: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def pair_split(self, qa_id: str) -> Split | None:
        group = self._pair_group().get(qa_id)
        return self.assignments.get(group) if group else None

    def _pair_group(self) -> dict[str, str]:
        return {qa_id: group for group, members in self.group_members.items() for qa_id in members}

    def split_sizes(self) -> dict[Split, int]:
        sizes = {s: 0 for s in Split}
        for group, split in self.assignments.items():
            sizes[split] += len(self.group_members.get(group, []))
        return sizes

    def to_dict(self) -> dict:
        return {
            "assignments": {g: s.value for g, s in self.assignments.items()},
            "per_cluster_counts": {str(c): dict(v) for c, v in self.per_cluster_counts.items()},
            "config_echo": {
                "train_count": self.config_echo.train_count,
                "val_count": self.config_echo.val_count,
                "test_count": self.config_echo.test_count,
                "train_ratio": self.config_echo.train_ratio,
                "val_ratio": self.config_echo.val_ratio,
                "test_ratio": self.config_echo.test_ratio,
                "k_clusters": self.config_echo.k_clusters,
                "seed": self.config_echo.seed,
                "min_test_per_cluster": self.config_echo.min_test_per_cluster,
            },
            "audit": self.audit,
            "group_members": self.group_members,
            "group_cluster": self.group_cluster,
            "warnings": self.warnings,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SplitManifest":
        return cls(
            assignments={g: Split(s) for g, s in raw["assignments"].items()},
            per_cluster_counts={int(c): dict(v) for c, v in raw["per_cluster_counts"].items()},
            config_echo=SplitConfig(**raw["config_echo"]),
            audit=raw.get("audit", {}),
            group_members=raw.get("group_members", {}),
            group_cluster={g: int(c) for g, c in raw.get("group_cluster", {}).items()},
            warnings=raw.get("warnings", []),
        )


def largest_remainder(weights: Sequence[float], total: int) -> list[int]:
    """Apportion `total` integer units proportionally to weights."""
    weight_sum = float(sum(weights))
    if weight_sum <= 0:
        return [0] * len(weights)
    quotas = [w / weight_sum * total for w in weights]
    floors = [int(np.floor(q)) for q in quotas]
    shortfall = total - sum(floors)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:shortfall]:
        floors[i] += 1
    return floors


# ---------------------------------------------------------------------------
# Embedding and clustering
# ---------------------------------------------------------------------------

def embed_corpus(pairs: Sequence[QaPair], embedder) -> dict[str, np.ndarray]:
    """One question vector per pair; cache behaviour belongs to the embedder."""
    vectors: dict[str, np.ndarray] = {}
    for pair in pairs:
        try:
            vectors[pair.qa_id] = np.asarray(embedder.embed(pair.question), dtype=float)
        except EmbedderFailure:
            raise
        except Exception as exc:
            raise EmbedderFailure(f"embedding failed for {pair.qa_id}: {exc}") from exc
    return vectors


def cluster_corpus(
    vectors: Mapping[str, np.ndarray],
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
    objective_trace: list[float] | None = None,
) -> list[ClusterAssignment]:
    """Lloyd iterations from greedy farthest-point initialization.

    Assignment ties break toward the lowest centroid index; fixed seed gives a
    fully deterministic result.
    """
    qa_ids = sorted(vectors)
    if k > len(qa_ids):
        raise KTooLarge(f"k={k} exceeds corpus size {len(qa_ids)}")
    points = np.vstack([vectors[q] for q in qa_ids])
    centroids = _farthest_point_init(points, k, seed)
    labels = np.zeros(len(qa_ids), dtype=int)
    for _ in range(max_iter):
        distances = np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=2)
        labels = distances.argmin(axis=1)  # argmin takes the lowest index on ties
        if objective_trace is not None:
            objective_trace.append(float((distances.min(axis=1) ** 2).sum()))
        moved = 0.0
        for c in range(k):
            members = points[labels == c]
            if len(members) == 0:
                continue
            new_centroid = members.mean(axis=0)
            moved = max(moved, float(np.linalg.norm(new_centroid - centroids[c])))
            centroids[c] = new_centroid
        if moved < tol:
            break
    distances = np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=2)
    labels = distances.argmin(axis=1)
    return [
        ClusterAssignment(qa_id=qa_ids[i], cluster=int(labels[i]), distance_to_centroid=float(distances[i, labels[i]]))
        for i in range(len(qa_ids))
    ]


def _farthest_point_init(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    first = int(rng.integers(len(points)))
    chosen = [first]
    min_dist = np.linalg.norm(points - points[first], axis=1)
    while len(chosen) < k:
        nxt = int(min_dist.argmax())  # ties -> lowest index
        chosen.append(nxt)
        min_dist = np.minimum(min_dist, np.linalg.norm(points - points[nxt], axis=1))
    return points[chosen].astype(float).copy()


def clustering_objective(vectors: Mapping[str, np.ndarray], assignments: Sequence[ClusterAssignment]) -> float:
    return float(sum(a.distance_to_centroid**2 for a in assignments))


# ---------------------------------------------------------------------------
# Stratified splitting
# ---------------------------------------------------------------------------

def stratified_split(
    assignments: Sequence[ClusterAssignment],
    groups: Mapping[str, str],
    config: SplitConfig,
) -> SplitManifest:
    """Allocate whole groups to train/val/test with per-cluster quotas.

    A group's cluster is the majority cluster of its members (ties to the
    lowest index); per-cluster pair quotas come from largest-remainder
    apportionment; test then val fill centroid-near groups first and train
    absorbs the remainder, so every populated cluster reaches train.
    """
    by_qa = {a.qa_id: a for a in assignments}
    missing = [qa_id for qa_id in by_qa if qa_id not in groups]
    if missing:
        raise ValueError(f"{len(missing)} qa_ids missing a group (e.g. {missing[0]!r})")
    members: dict[str, list[str]] = defaultdict(list)
    for qa_id in sorted(by_qa):
        members[groups[qa_id]].append(qa_id)

    group_cluster: dict[str, int] = {}
    group_distance: dict[str, float] = {}
    for group, qa_ids in members.items():
        tally = Counter(by_qa[q].cluster for q in qa_ids)
        top = max(tally.values())
        group_cluster[group] = min(c for c, n in tally.items() if n == top)
        group_distance[group] = float(np.mean([by_qa[q].distance_to_centroid for q in qa_ids]))

    clusters = sorted(set(group_cluster.values()))
    cluster_groups: dict[int, list[str]] = {
        c: sorted((g for g, cc in group_cluster.items() if cc == c), key=lambda g: (group_distance[g], g))
        for c in clusters
    }
    cluster_pairs = {c: sum(len(members[g]) for g in gs) for c, gs in cluster_groups.items()}
    total_pairs = sum(cluster_pairs.values())
    counts = config.resolve_counts(total_pairs)

    warnings: list[str] = []
    min_test = config.min_test_per_cluster
    if counts[Split.TEST] < min_test * len(clusters):
        warnings.append(
            f"test_count {counts[Split.TEST]} cannot give {min_test} group(s) to each of "
            f"{len(clusters)} clusters; minimum relaxed"
        )
        min_test = 0
    weights = [cluster_pairs[c] for c in clusters]
    test_quota = dict(zip(clusters, largest_remainder(weights, counts[Split.TEST])))
    val_quota = dict(zip(clusters, largest_remainder(weights, counts[Split.VAL])))

    assignment: dict[str, Split] = {}
    for c in clusters:
        ordered = list(cluster_groups[c])
        remaining = list(ordered)
        taken_test: list[str] = []
        test_pairs = 0
        # leave at least one group behind so the cluster reaches train
        while remaining[:-1] and (test_pairs < test_quota[c] or len(taken_test) < min_test):
            group = remaining.pop(0)
            taken_test.append(group)
            test_pairs += len(members[group])
        if len(ordered) == 1 and min_test > 0:
            warnings.append(f"cluster {c} has a single group; it goes to train, not test")
        taken_val: list[str] = []
        val_pairs = 0
        while remaining[:-1] and val_pairs < val_quota[c]:
            group = remaining.pop(0)
            taken_val.append(group)
            val_pairs += len(members[group])
        for group in taken_test:
            assignment[group] = Split.TEST
        for group in taken_val:
            assignment[group] = Split.VAL
        for group in remaining:
            assignment[group] = Split.TRAIN

    per_cluster_counts: dict[int, dict[str, int]] = {
        c: {s.value: 0 for s in Split} for c in clusters
    }
    for group, split in assignment.items():
        per_cluster_counts[group_cluster[group]][split.value] += len(members[group])

    return SplitManifest(
        assignments=assignment,
        per_cluster_counts=per_cluster_counts,
        config_echo=config,
        group_members={g: list(m) for g, m in members.items()},
        group_cluster=group_cluster,
        warnings=warnings,
    )


def leakage_audit(
    manifest: SplitManifest,
    vectors: Mapping[str, np.ndarray],
    threshold: float = 0.95,
) -> dict:
    """Flag groups spanning splits and test questions near-duplicating train ones."""
    violations: list[dict] = []
    qa_split: dict[str, Split] = {}
    for group, member_ids in manifest.group_members.items():
        split = manifest.assignments.get(group)
        if split is None:
            continue
        for qa_id in member_ids:
            prior = qa_split.get(qa_id)
            if prior is not None and prior != split:
                violations.append({"kind": "cross_split_group", "qa_id": qa_id, "splits": sorted({prior.value, split.value})})
            qa_split[qa_id] = split

    train_ids = sorted(q for q, s in qa_split.items() if s == Split.TRAIN and q in vectors)
    test_ids = sorted(q for q, s in qa_split.items() if s == Split.TEST and q in vectors)
    if train_ids and test_ids:
        train_m = np.vstack([unit(np.asarray(vectors[q], dtype=float)) for q in train_ids])
        test_m = np.vstack([unit(np.asarray(vectors[q], dtype=float)) for q in test_ids])
        sims = test_m @ train_m.T
        for i, j in zip(*np.nonzero(sims >= threshold)):
            violations.append(
                {
                    "kind": "near_duplicate",
                    "test_qa_id": test_ids[int(i)],
                    "train_qa_id": train_ids[int(j)],
                    "cosine": float(sims[i, j]),
                }
            )
    return {"threshold": threshold, "violations": violations, "violation_count": len(violations)}


# ---------------------------------------------------------------------------
# 2D projection
# ---------------------------------------------------------------------------

def project_2d(vectors: Mapping[str, np.ndarray], tol: float = 1e-9, max_iter: int = 10_000) -> dict[str, tuple[float, float]]:
    """Top-2 principal components by power iteration, sign-fixed and centered."""
    qa_ids = sorted(vectors)
    if len(qa_ids) < 2:
        raise ValueError("project_2d needs at least 2 vectors")
    points = np.vstack([np.asarray(vectors[q], dtype=float) for q in qa_ids])
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / len(qa_ids)
    if float(np.trace(cov)) < 1e-12:
        raise DegenerateVariance("all points identical")
    if centered.shape[1] == 1:
        return {qa_ids[i]: (float(centered[i, 0]), 0.0) for i in range(len(qa_ids))}
    components: list[np.ndarray] = []
    work = cov.copy()
    for _ in range(2):
        vec = _power_iteration(work, components, tol, max_iter)
        pivot = int(np.abs(vec).argmax())
        if vec[pivot] < 0:
            vec = -vec
        components.append(vec)
        eigenvalue = float(vec @ work @ vec)
        work = work - eigenvalue * np.outer(vec, vec)
    xs = centered @ components[0]
    ys = centered @ components[1]
    return {qa_ids[i]: (float(xs[i]), float(ys[i])) for i in range(len(qa_ids))}


def _power_iteration(matrix: np.ndarray, prior: list[np.ndarray], tol: float, max_iter: int) -> np.ndarray:
    dim = matrix.shape[0]
    vec = _orthogonal_start(dim, prior)
    for _ in range(max_iter):
        nxt = matrix @ vec
        for p in prior:  # keep components mutually orthogonal even when the
            nxt -= (nxt @ p) * p  # deflated matrix is numerically zero
        norm = float(np.linalg.norm(nxt))
        if norm < 1e-15:
            return vec
        nxt /= norm
        if float(np.linalg.norm(nxt - vec)) < tol:
            return nxt
        vec = nxt
    return vec


def _orthogonal_start(dim: int, prior: list[np.ndarray]) -> np.ndarray:
    for i in range(dim):
        vec = np.array([1.0 / (j + i + 1) for j in range(dim)])
        for p in prior:
            vec -= (vec @ p) * p
        norm = float(np.linalg.norm(vec))
        if norm > 1e-12:
            return vec / norm
    raise DegenerateVariance("cannot build an orthogonal start vector")


def export_projection_csv(
    path: Path,
    projection: Mapping[str, tuple[float, float]],
    assignments: Sequence[ClusterAssignment],
) -> None:
    import csv

    cluster_of = {a.qa_id: a.cluster for a in assignments}
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["qa_id", "cluster", "x", "y"])
        for qa_id in sorted(projection):
            x, y = projection[qa_id]
            writer.writerow([qa_id, cluster_of.get(qa_id, ""), f"{x:.8f}", f"{y:.8f}"])


def load_external_projection(path: Path | str) -> dict[str, tuple[float, float]]:
    """Import externally computed 2D coordinates (e.g. a t-SNE run).

    Accepts the export schema (qa_id, cluster, x, y) or a bare (qa_id, x, y).
    """
    import csv

    out: dict[str, tuple[float, float]] = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        fields = reader.fieldnames or []
        if "qa_id" not in fields or "x" not in fields or "y" not in fields:
            raise ValueError(f"{path}: projection CSV needs qa_id, x, y columns")
        for row in reader:
            out[row["qa_id"]] = (float(row["x"]), float(row["y"]))
    return out


def save_manifest(path: Path, manifest: SplitManifest) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True))


def load_manifest(path: Path) -> SplitManifest:
    return SplitManifest.from_dict(json.loads(path.read_text()))
