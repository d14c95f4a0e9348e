"""Builders shared across test modules."""

from __future__ import annotations

from typing import Iterable, Mapping

from taxa.model import (
    CoderSession,
    LabelAssignment,
    TaxonNode,
    TaxonPath,
    create_session,
)


def build_tree(paths: Iterable[TaxonPath]) -> TaxonNode:
    """Tree containing exactly the given paths (prefixes filled in),
    children ordered by first appearance."""
    root = TaxonNode("root")
    for path in paths:
        node = root
        for seg in path:
            child = node.child(seg)
            if child is None:
                child = TaxonNode(seg)
                node.children.append(child)
            node = child
    return root


def session_from_state(
    coder_id: str,
    paths: Iterable[TaxonPath],
    labels: Mapping[str, Iterable[TaxonPath]] | None = None,
    unsure: Iterable[str] = (),
) -> CoderSession:
    """Session with a hand-built tree and labels; no log (fixture-only)."""
    session = create_session(coder_id)
    session.root = build_tree(paths)
    unsure = set(unsure)
    for uuid, pset in (labels or {}).items():
        session.labels[uuid] = LabelAssignment(
            uuid, {tuple(p) for p in pset}, uuid in unsure
        )
    return session
