"""Independent brute-force oracles: naive re-implementations of the metric
and voting definitions, kept deliberately separate from the engine."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

from taxa.model import tree_paths


def brute_exact(labelings):
    uuids = list(labelings[0])
    if not uuids:
        return Fraction(1)
    same = sum(
        1
        for u in uuids
        if len({frozenset(lab[u]) for lab in labelings}) == 1
    )
    return Fraction(same, len(uuids))


def brute_jaccard_pairwise(labelings):
    uuids = list(labelings[0])
    if not uuids:
        return Fraction(1)
    per_pair = []
    for i, j in combinations(range(len(labelings)), 2):
        scores = []
        for u in uuids:
            a, b = set(labelings[i][u]), set(labelings[j][u])
            union = a | b
            scores.append(
                Fraction(1) if not union else Fraction(len(a & b), len(union))
            )
        per_pair.append(sum(scores, Fraction(0)) / len(scores))
    return sum(per_pair, Fraction(0)) / len(per_pair)


def brute_node_iou(trees):
    sets_ = [set(tree_paths(t)) for t in trees]
    vals = []
    for a, b in combinations(sets_, 2):
        union = a | b
        vals.append(
            Fraction(1) if not union else Fraction(len(a & b), len(union))
        )
    return sum(vals, Fraction(0)) / len(vals)


def brute_majority(sessions):
    """Literal strict-majority voter over paths, images, and labels."""
    n = len(sessions)
    path_sets = [set(tree_paths(s.root)) for s in sessions]
    all_paths = set().union(*path_sets) if path_sets else set()
    kept = {p for p in all_paths if sum(p in ps for ps in path_sets) * 2 > n}
    uuids = set().union(*[set(s.labels) for s in sessions])
    labels = {}
    for u in uuids:
        present = sum(u in s.labels for s in sessions)
        if present * 2 <= n:
            continue
        candidates = set().union(
            *[set(s.labels[u].paths) for s in sessions if u in s.labels]
        )
        labels[u] = {
            p
            for p in candidates
            if sum(u in s.labels and p in s.labels[u].paths for s in sessions)
            * 2
            > n
        }
    return kept, labels


def prefix_close(paths):
    closed = set()
    for p in paths:
        for i in range(1, len(p) + 1):
            closed.add(p[:i])
    return closed
