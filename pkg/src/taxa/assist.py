"""Machine assistance for taxon division.

Embeddings normally come from an external model run and are ingested from
file; :func:`fallback_embed` is a deterministic color/intensity descriptor so
small corpora can be processed without any model.  Division clusters a leaf's
images with seeded k-means into ``floor(sqrt(n))`` groups and picks, per
cluster, the member nearest the centroid as its representative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DecodeError,
    DimMismatch,
    EmptyLabeledSet,
    InvalidPartition,
    MissingEmbedding,
    NotEnoughData,
    TooManyClusters,
)
from .model import CoderSession, TaxonPath, as_path, format_path

EMBED_DIM = 128

_LUMA = np.array([0.299, 0.587, 0.114])  # ITU-R 601

CAPTION_PREFIXES = (
    "it is a ",
    "it is an ",
    "it's a ",
    "it's an ",
    "this is a ",
    "this is an ",
    "a ",
    "an ",
    "the ",
)


@dataclass
class EmbeddingTable:
    """uuid -> fixed-dimension vector; all vectors finite and same length."""

    dim: int
    vectors: dict[str, np.ndarray]

    @classmethod
    def from_dict(cls, vectors: Mapping[str, Sequence[float]]) -> "EmbeddingTable":
        out: dict[str, np.ndarray] = {}
        dim: int | None = None
        for uuid, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1:
                raise DimMismatch(f"embedding for {uuid!r} is not a vector")
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise DimMismatch(
                    f"embedding for {uuid!r} has dim {arr.shape[0]}, expected {dim}"
                )
            if not np.all(np.isfinite(arr)):
                raise DimMismatch(f"embedding for {uuid!r} has NaN/Inf entries")
            out[uuid] = arr
        return cls(dim=dim if dim is not None else 0, vectors=out)

    def __contains__(self, uuid: str) -> bool:
        return uuid in self.vectors

    def __getitem__(self, uuid: str) -> np.ndarray:
        try:
            return self.vectors[uuid]
        except KeyError:
            raise MissingEmbedding(uuid) from None

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass
class ClusterPart:
    name: str
    members: set[str]
    representative: str
    caption: str


@dataclass
class ClusterPartition:
    parts: list[ClusterPart]

    def as_parts(self) -> list[tuple[str, set[str]]]:
        """Shape accepted by ``CoderSession.apply_partition``."""
        return [(p.name, set(p.members)) for p in self.parts]


def fallback_embed(image: np.ndarray) -> np.ndarray:
    """128-dim descriptor of an RGB raster: color histogram + intensity grid.

    The first 64 entries are a 4x4x4 RGB histogram (each channel split into
    four equal ranges) normalized by pixel count; the last 64 are an 8x8 grid
    of mean luma scaled to [0, 1].  Grid cells for images narrower than the
    grid fall back to the nearest pixel row/column, so every cell is defined.
    The result is L2-normalized; an all-zero raw vector stays zero.
    """
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DecodeError("expected a non-empty HxWx3 RGB array")
    arr = np.clip(arr.astype(np.float64), 0.0, 255.0)
    h, w = arr.shape[:2]

    bins = np.minimum(arr.astype(np.int64) // 64, 3)
    flat = bins[:, :, 0] * 16 + bins[:, :, 1] * 4 + bins[:, :, 2]
    hist = np.bincount(flat.ravel(), minlength=64).astype(np.float64)
    hist /= h * w

    luma = arr @ _LUMA
    grid = np.empty((8, 8))
    for i in range(8):
        r0 = i * h // 8
        r1 = max(r0 + 1, (i + 1) * h // 8)
        for j in range(8):
            c0 = j * w // 8
            c1 = max(c0 + 1, (j + 1) * w // 8)
            grid[i, j] = luma[r0:r1, c0:c1].mean()
    grid /= 255.0

    raw = np.concatenate([hist, grid.ravel()])
    norm = np.linalg.norm(raw)
    return raw / norm if norm > 0 else raw


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine similarity; a zero vector compares as 0 to everything."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimMismatch(f"dim mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def kmeans(
    points: Mapping[str, Sequence[float]],
    k: int,
    seed: int = 0,
    trace: list[float] | None = None,
) -> list[set[str]]:
    """Seed-deterministic k-means over keyed vectors.

    k-means++ initialization from a seeded PCG64 generator, Euclidean
    distances, assignment ties to the lowest cluster index, empty clusters
    re-centered on the point farthest from its centroid, at most 100
    iterations.  ``trace``, when given, collects the objective value after
    each update step.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(points)
    if k > n:
        raise TooManyClusters(f"k={k} exceeds {n} points")
    uuids = sorted(points)
    x = np.stack([np.asarray(points[u], dtype=np.float64) for u in uuids])
    if x.ndim != 2:
        raise DimMismatch("points must share one dimension")

    rng = np.random.default_rng(seed)
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[int(rng.integers(n))]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:  # all remaining points coincide with chosen centers
            chosen = {tuple(c) for c in centroids[:i]}
            idx = next((j for j in range(n) if tuple(x[j]) not in chosen), 0)
        centroids[i] = x[idx]
        d2 = np.minimum(d2, ((x - centroids[i]) ** 2).sum(axis=1))

    assign = np.full(n, -1)
    for _ in range(100):
        dists = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = dists.argmin(axis=1)
        counts = np.bincount(new_assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            movable = np.flatnonzero(counts[new_assign] > 1)
            far = movable[dists[movable, new_assign[movable]].argmax()]
            counts[new_assign[far]] -= 1
            new_assign[far] = j
            counts[j] = 1
            centroids[j] = x[far]
            dists[:, j] = ((x - centroids[j]) ** 2).sum(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            centroids[j] = x[assign == j].mean(axis=0)
        if trace is not None:
            d = ((x - centroids[assign]) ** 2).sum()
            trace.append(float(d))

    return [
        {uuids[i] for i in np.flatnonzero(assign == j)} for j in range(k)
    ]


def postprocess_caption(text: str) -> str:
    """Trim boilerplate lead-ins from a generated caption."""
    out = text.strip()
    low = out.lower()
    for prefix in CAPTION_PREFIXES:
        if low.startswith(prefix):
            out = out[len(prefix):].strip()
            break
    return out if out else "unknown"


def cluster_taxon(
    session: CoderSession,
    path: TaxonPath,
    emb: EmbeddingTable,
    captions: Mapping[str, str] | None = None,
    seed: int = 0,
) -> ClusterPartition:
    """Cluster a leaf's images into floor(sqrt(n)) named parts.

    Pure preview: the session is not touched.  Feed the result to
    ``apply_partition`` to commit it.
    """
    path = as_path(path)
    node = session.node_at(path)
    if not node.is_leaf():
        raise InvalidPartition(f"{format_path(path)!r} is not a leaf")
    holders = session.images_at(path)
    if not holders:
        raise NotEnoughData(f"{format_path(path)!r} holds no images")
    for uuid in holders:
        if uuid not in emb:
            raise MissingEmbedding(uuid)
    captions = captions or {}

    k = max(1, math.isqrt(len(holders)))
    clusters = kmeans({u: emb[u] for u in holders}, k, seed)

    parts: list[ClusterPart] = []
    for i, members in enumerate(clusters):
        vectors = np.stack([emb[u] for u in sorted(members)])
        centroid = vectors.mean(axis=0)
        rep = min(
            sorted(members),
            key=lambda u: (float(np.linalg.norm(emb[u] - centroid)), u),
        )
        parts.append(
            ClusterPart(
                name=f"cluster-{i}",
                members=set(members),
                representative=rep,
                caption=postprocess_caption(captions.get(rep, "")),
            )
        )
    return ClusterPartition(parts=parts)


def nearest_labeled(
    target: str,
    labeled_uuids: Sequence[str],
    emb: EmbeddingTable,
) -> str:
    """Labeled image most cosine-similar to ``target`` (ties: lowest uuid)."""
    if not labeled_uuids:
        raise EmptyLabeledSet("no labeled images to match against")
    tvec = emb[target]
    best: str | None = None
    best_sim = -2.0
    for uuid in sorted(labeled_uuids):
        sim = cosine(tvec, emb[uuid])
        if sim > best_sim:
            best, best_sim = uuid, sim
    return best
