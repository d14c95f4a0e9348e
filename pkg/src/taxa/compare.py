"""Comparison and merging of multiple coders' sessions.

Taxa are matched across coders purely by path identity: two nodes are the
same taxon exactly when the name lists from the root coincide.  The union
merge exposes conflicts (who created what, who assigned what); the majority
merge resolves them by strict-majority voting.  Agreement metrics are
computed in exact rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Sequence

from .errors import ImageSetMismatch, NotEnoughData
from .model import (
    ROOT,
    CoderSession,
    TaxonNode,
    TaxonPath,
    tree_paths,
)

Labeling = Mapping[str, set[TaxonPath]]


@dataclass
class MergedNode:
    """Per-taxon annotation in a union merge."""

    path: TaxonPath
    creators: list[str]
    assigned: dict[str, set[str]]  # coder_id -> images aggregated by prefix
    consensus_count: int
    partial_count: int


@dataclass
class AnnotatedMergedTree:
    """Union of the coders' trees with discrepancy annotations."""

    coders: list[str]
    nodes: dict[TaxonPath, MergedNode]
    child_order: dict[TaxonPath, list[str]]
    warnings: list[str] = field(default_factory=list)

    def children_of(self, path: TaxonPath) -> list[TaxonPath]:
        return [path + (name,) for name in self.child_order.get(path, [])]


@dataclass
class MetricsReport:
    exact_match: Fraction
    jaccard: Fraction
    node_iou: Fraction | None = None
    depth: int | None = None
    n_images: int = 0


def _aggregate_by_prefix(session: CoderSession) -> dict[TaxonPath, set[str]]:
    """Images per taxon, where a label counts for all its prefixes."""
    out: dict[TaxonPath, set[str]] = {}
    for uuid, assignment in session.labels.items():
        for path in assignment.paths:
            for i in range(1, len(path) + 1):
                out.setdefault(path[:i], set()).add(uuid)
    return out


def union_merge(sessions: Sequence[CoderSession]) -> AnnotatedMergedTree:
    """Merge trees by path union, annotating creator and assignment gaps."""
    if not sessions:
        raise NotEnoughData("union_merge needs at least one session")
    coders = [s.coder_id for s in sessions]
    warnings: list[str] = []
    corpora = [set(s.labels) for s in sessions]
    if any(c != corpora[0] for c in corpora[1:]):
        warnings.append("sessions do not share the same image corpus")

    child_order: dict[TaxonPath, list[str]] = {}
    creators: dict[TaxonPath, list[str]] = {}
    for session in sessions:
        for path in tree_paths(session.root):
            siblings = child_order.setdefault(path[:-1], [])
            if path[-1] not in siblings:
                siblings.append(path[-1])
            creators.setdefault(path, []).append(session.coder_id)

    aggregated = {
        s.coder_id: _aggregate_by_prefix(s) for s in sessions
    }
    nodes: dict[TaxonPath, MergedNode] = {}
    for path, made_by in creators.items():
        assigned = {
            coder: set(aggregated[coder].get(path, set())) for coder in made_by
        }
        sets = list(assigned.values())
        common = set.intersection(*sets) if sets else set()
        total = set.union(*sets) if sets else set()
        nodes[path] = MergedNode(
            path=path,
            creators=made_by,
            assigned=assigned,
            consensus_count=len(common),
            partial_count=len(total - common),
        )
    return AnnotatedMergedTree(
        coders=coders, nodes=nodes, child_order=child_order, warnings=warnings
    )


def majority_merge(
    sessions: Sequence[CoderSession],
) -> tuple[TaxonNode, dict[str, set[TaxonPath]]]:
    """Strict-majority vote over taxa and labels.

    A path survives when strictly more than half of the coders' trees contain
    it; an image's label survives when strictly more than half of the coders
    assigned exactly that path.  Images loaded by at most half of the coders
    are dropped from the result.
    """
    if not sessions:
        raise NotEnoughData("majority_merge needs at least one session")
    n = len(sessions)
    quorum = n / 2

    votes: dict[TaxonPath, int] = {}
    # (first session index, position under parent) for deterministic ordering
    first_seen: dict[TaxonPath, tuple[int, int]] = {}
    for i, session in enumerate(sessions):
        for path in tree_paths(session.root):
            votes[path] = votes.get(path, 0) + 1
            if path not in first_seen:
                pos = [
                    c.name for c in session.node_at(path[:-1]).children
                ].index(path[-1])
                first_seen[path] = (i, pos)
    kept = {path for path, v in votes.items() if v > quorum}

    root = TaxonNode("root")

    def build(prefix: TaxonPath, into: TaxonNode) -> None:
        children = [p for p in kept if len(p) == len(prefix) + 1 and p[: len(prefix)] == prefix]
        children.sort(key=lambda p: (first_seen[p][0], first_seen[p][1], p[-1]))
        for path in children:
            node = TaxonNode(path[-1])
            into.children.append(node)
            build(path, node)

    build(ROOT, root)

    label_votes: dict[str, dict[TaxonPath, int]] = {}
    image_votes: dict[str, int] = {}
    for session in sessions:
        for uuid, assignment in session.labels.items():
            image_votes[uuid] = image_votes.get(uuid, 0) + 1
            per_image = label_votes.setdefault(uuid, {})
            for path in assignment.paths:
                per_image[path] = per_image.get(path, 0) + 1
    labels: dict[str, set[TaxonPath]] = {}
    for session in sessions:  # preserve first-session load order
        for uuid in session.labels:
            if uuid in labels or image_votes[uuid] <= quorum:
                continue
            labels[uuid] = {
                path for path, v in label_votes[uuid].items() if v > quorum
            }
    return root, labels


def _check_shared_images(labelings: Sequence[Labeling]) -> list[str]:
    if len(labelings) < 2:
        raise NotEnoughData("need at least two labelings to compare")
    keys = set(labelings[0])
    for other in labelings[1:]:
        if set(other) != keys:
            raise ImageSetMismatch("labelings cover different image sets")
    return list(labelings[0])


def exact_match_ratio(labelings: Sequence[Labeling]) -> Fraction:
    """Fraction of images whose path sets agree across all labelings."""
    uuids = _check_shared_images(labelings)
    if not uuids:
        return Fraction(1)
    matches = sum(
        1
        for u in uuids
        if all(set(lab[u]) == set(labelings[0][u]) for lab in labelings[1:])
    )
    return Fraction(matches, len(uuids))


def jaccard(a: set[TaxonPath], b: set[TaxonPath]) -> Fraction:
    """|A∩B| / |A∪B|; two empty sets count as identical (1)."""
    union = a | b
    if not union:
        return Fraction(1)
    return Fraction(len(a & b), len(union))


def pairwise_jaccard(labelings: Sequence[Labeling]) -> Fraction:
    """Mean over coder pairs of the per-pair mean per-image Jaccard."""
    uuids = _check_shared_images(labelings)
    pairs = list(combinations(range(len(labelings)), 2))
    if not uuids:
        return Fraction(1)
    total = Fraction(0)
    for i, j in pairs:
        per_pair = sum(
            (jaccard(set(labelings[i][u]), set(labelings[j][u])) for u in uuids),
            Fraction(0),
        )
        total += per_pair / len(uuids)
    return total / len(pairs)


def node_iou(trees: Sequence[TaxonNode]) -> Fraction:
    """Pairwise IoU of the trees' path sets (root excluded), averaged."""
    if len(trees) < 2:
        raise NotEnoughData("need at least two trees")
    path_sets = [set(tree_paths(t)) for t in trees]
    pairs = list(combinations(path_sets, 2))
    total = sum((jaccard(a, b) for a, b in pairs), Fraction(0))
    return total / len(pairs)


def dissensus_images(sessions: Sequence[CoderSession]) -> list[str]:
    """Images (shared by all sessions) whose label sets differ anywhere."""
    if len(sessions) < 2:
        return []
    shared = set(sessions[0].labels)
    for s in sessions[1:]:
        shared &= set(s.labels)
    out = []
    for uuid in sessions[0].labels:  # first session's load order
        if uuid not in shared:
            continue
        first = sessions[0].labels[uuid].paths
        if any(s.labels[uuid].paths != first for s in sessions[1:]):
            out.append(uuid)
    return out


def unsure_images(sessions: Sequence[CoderSession]) -> list[str]:
    """Images marked unsure by at least one coder, in first-seen load order."""
    out: list[str] = []
    seen: set[str] = set()
    for session in sessions:
        for uuid, assignment in session.labels.items():
            if assignment.unsure and uuid not in seen:
                seen.add(uuid)
                out.append(uuid)
    return out


def truncate_labels(
    labels: Labeling, depth: int
) -> dict[str, set[TaxonPath]]:
    """Cut every path to its first ``depth`` segments; duplicates collapse."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return {u: {p[:depth] for p in paths} for u, paths in labels.items()}


def agreement_report(
    sessions: Sequence[CoderSession], depth: int | None = None
) -> MetricsReport:
    """Match, pairwise Jaccard, and node IoU over the sessions."""
    labelings: list[Labeling] = [s.label_sets() for s in sessions]
    if depth is not None:
        labelings = [truncate_labels(lab, depth) for lab in labelings]
    return MetricsReport(
        exact_match=exact_match_ratio(labelings),
        jaccard=pairwise_jaccard(labelings),
        node_iou=node_iou([s.root for s in sessions]),
        depth=depth,
        n_images=len(labelings[0]),
    )
