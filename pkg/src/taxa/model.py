"""Taxonomy tree, label store, and the editing operators.

A coder's working state is a :class:`CoderSession`: a rooted tree of named
taxa plus, for every loaded image, a non-empty set of label paths that must
all point at leaves of the tree.  Taxa are identified by their *path* (the
tuple of names from, but excluding, the root), never by node object identity.

Every mutation appends an entry to the session's operation log; replaying the
log against an empty session reproduces the state exactly.  The session
version is the length of the log.

Images that would be left without a label ("orphans") are parked in the
reserved ``ungrouped`` taxon at root level.  If a coder has turned that taxon
into an internal node, parking descends the chain of ``ungrouped`` children
(creating them when needed) so the parking target is always a leaf.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .errors import (
    CannotRemoveRoot,
    CannotRemoveUngrouped,
    CorruptLog,
    CyclicMove,
    DuplicateImage,
    DuplicateSibling,
    EmptyCoderId,
    InvalidName,
    InvalidPartition,
    NonLeafLabel,
    NonLeafMerge,
    NoSuchAssignment,
    NoSuchImage,
    NoSuchTaxon,
    NothingToFlatten,
    RootOperand,
    SelfMerge,
    TaxaError,
)

TaxonPath = tuple[str, ...]

ROOT: TaxonPath = ()
UNGROUPED = "ungrouped"

ORIGIN_MANUAL = "manual"
ORIGIN_MACHINE = "machine-cluster"
_ORIGINS = (ORIGIN_MANUAL, ORIGIN_MACHINE)

#: Operator names that may appear in a log or an op envelope.
MUTATING_OPS = (
    "load_batch",
    "create_taxon",
    "apply_partition",
    "flatten_taxon",
    "merge_taxa",
    "move_taxon",
    "rename_taxon",
    "remove_taxon",
    "label_image",
    "unlabel_image",
    "set_unsure",
    "set_note",
    "add_memo",
)


def as_path(segments: Iterable[str]) -> TaxonPath:
    """Normalize a sequence of segment names to a path tuple."""
    if isinstance(segments, str):
        raise InvalidName(
            f"a path is a sequence of segments, not the bare string {segments!r}"
        )
    path = tuple(segments)
    for seg in path:
        if not isinstance(seg, str):
            raise InvalidName(f"path segment {seg!r} is not a string")
    return path


def parse_path(text: str) -> TaxonPath:
    """Parse a '/'-joined path; the empty string denotes the root."""
    return tuple(text.split("/")) if text else ROOT


def format_path(path: TaxonPath) -> str:
    return "/".join(path)


def check_name(name: str) -> str:
    if not isinstance(name, str) or not name:
        raise InvalidName("taxon name must be a non-empty string")
    if "/" in name:
        raise InvalidName(f"taxon name {name!r} must not contain '/'")
    return name


@dataclass
class TaxonNode:
    """One taxon: a name, ordered children, and bookkeeping fields."""

    name: str
    children: list["TaxonNode"] = field(default_factory=list)
    origin: str = ORIGIN_MANUAL
    note: str | None = None

    def child(self, name: str) -> "TaxonNode | None":
        for node in self.children:
            if node.name == name:
                return node
        return None

    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class ImageRecord:
    """Corpus metadata for one image; extra dataset fields ride along."""

    uuid: str
    display_name: str | None = None
    publish_year: int | None = None
    source_fields: dict[str, Any] = field(default_factory=dict)


@dataclass
class LabelAssignment:
    uuid: str
    paths: set[TaxonPath]
    unsure: bool = False


def tree_paths(root: TaxonNode) -> list[TaxonPath]:
    """All paths in the tree, excluding the root itself, in DFS order."""
    out: list[TaxonPath] = []

    def walk(node: TaxonNode, prefix: TaxonPath) -> None:
        for child in node.children:
            path = prefix + (child.name,)
            out.append(path)
            walk(child, path)

    walk(root, ROOT)
    return out


def tree_snapshot(root: TaxonNode) -> tuple:
    """Hashable structural snapshot of a tree (names, origins, notes, order)."""
    return (
        root.name,
        root.origin,
        root.note,
        tuple(tree_snapshot(c) for c in root.children),
    )


def copy_tree(root: TaxonNode) -> TaxonNode:
    return TaxonNode(
        name=root.name,
        children=[copy_tree(c) for c in root.children],
        origin=root.origin,
        note=root.note,
    )


class CoderSession:
    """One coder's tree, labels, unsure flags, memos, and operation log."""

    def __init__(self, session_id: str, coder_id: str):
        if not coder_id:
            raise EmptyCoderId("coder_id must be non-empty")
        self.session_id = session_id
        self.coder_id = coder_id
        self.root = TaxonNode("root")
        self.labels: dict[str, LabelAssignment] = {}
        self.memos: list[str] = []
        self.log: list[dict[str, Any]] = []

    # -- introspection -------------------------------------------------

    @property
    def version(self) -> int:
        return len(self.log)

    def node_at(self, path: TaxonPath) -> TaxonNode:
        node = self.root
        for seg in path:
            nxt = node.child(seg)
            if nxt is None:
                raise NoSuchTaxon(f"no taxon at {format_path(path)!r}")
            node = nxt
        return node

    def has_path(self, path: TaxonPath) -> bool:
        try:
            self.node_at(path)
            return True
        except NoSuchTaxon:
            return False

    def paths(self) -> list[TaxonPath]:
        return tree_paths(self.root)

    def leaf_paths(self) -> list[TaxonPath]:
        return [p for p in self.paths() if self.node_at(p).is_leaf()]

    def images_at(self, path: TaxonPath) -> list[str]:
        """Images labeled exactly at ``path``, in load order."""
        return [u for u, a in self.labels.items() if path in a.paths]

    def label_sets(self) -> dict[str, set[TaxonPath]]:
        return {u: set(a.paths) for u, a in self.labels.items()}

    def state_snapshot(self) -> tuple:
        """Comparable snapshot of tree, labels (in load order), and memos."""
        return (
            tree_snapshot(self.root),
            tuple(
                (u, tuple(sorted(a.paths)), a.unsure)
                for u, a in self.labels.items()
            ),
            tuple(self.memos),
        )

    # -- log plumbing ----------------------------------------------------

    def _log_op(self, op: str, args: dict[str, Any]) -> None:
        self.log.append({"version": len(self.log) + 1, "op": op, "args": args})

    # -- orphan parking ----------------------------------------------------

    def _leafward_ungrouped(self, path: TaxonPath) -> TaxonPath:
        # Descend through 'ungrouped' children until a leaf is reached,
        # creating links on the way; 'path' itself must already exist.
        node = self.node_at(path)
        while node.children:
            child = node.child(UNGROUPED)
            if child is None:
                child = TaxonNode(UNGROUPED)
                node.children.append(child)
            path = path + (UNGROUPED,)
            node = child
        return path

    def _parking_path(self) -> TaxonPath:
        if self.root.child(UNGROUPED) is None:
            self.root.children.append(TaxonNode(UNGROUPED))
        return self._leafward_ungrouped((UNGROUPED,))

    # -- label rewriting helpers --------------------------------------------

    def _rewrite_prefix(self, old: TaxonPath, new: TaxonPath) -> None:
        n = len(old)
        for a in self.labels.values():
            if any(p[:n] == old for p in a.paths):
                a.paths = {new + p[n:] if p[:n] == old else p for p in a.paths}

    def _migrate_if_first_child(self, parent: TaxonPath, created: str) -> None:
        # 'created' just became the only child of 'parent': append an
        # 'ungrouped' sibling (unless the new child is itself named so) and
        # push parent's direct labels down to keep them on a leaf.
        parent_node = self.node_at(parent)
        if created != UNGROUPED and parent_node.child(UNGROUPED) is None:
            parent_node.children.append(TaxonNode(UNGROUPED))
        target = self._leafward_ungrouped(parent + (UNGROUPED,))
        for a in self.labels.values():
            if parent in a.paths:
                a.paths.discard(parent)
                a.paths.add(target)

    # -- operators -----------------------------------------------------------

    def load_batch(self, uuids: Sequence[str]) -> None:
        """Load a new batch of images; each lands in ``ungrouped``."""
        seen: set[str] = set()
        for uuid in uuids:
            if uuid in self.labels or uuid in seen:
                raise DuplicateImage(f"image {uuid!r} already loaded")
            seen.add(uuid)
        park = self._parking_path()
        for uuid in uuids:
            self.labels[uuid] = LabelAssignment(uuid, {park})
        self._log_op("load_batch", {"uuids": list(uuids)})

    def create_taxon(self, parent: Iterable[str], name: str) -> None:
        """Append a taxon under ``parent`` (the empty path denotes root)."""
        parent = as_path(parent)
        check_name(name)
        parent_node = self.node_at(parent)
        if parent_node.child(name) is not None:
            raise DuplicateSibling(
                f"{format_path(parent)!r} already has a child {name!r}"
            )
        was_leaf = parent_node.is_leaf()
        parent_node.children.append(TaxonNode(name))
        if was_leaf:
            self._migrate_if_first_child(parent, name)
        self._log_op("create_taxon", {"parent": list(parent), "name": name})

    def apply_partition(
        self,
        path: Iterable[str],
        parts: Sequence[tuple[str, Iterable[str]]],
        origin: str = ORIGIN_MACHINE,
    ) -> None:
        """Divide a leaf into child taxa, distributing its images.

        ``parts`` must partition exactly the images labeled at ``path``.
        """
        path = as_path(path)
        if not path:
            raise RootOperand("cannot divide the root")
        if origin not in _ORIGINS:
            raise InvalidPartition(f"unknown origin {origin!r}")
        node = self.node_at(path)
        if not node.is_leaf():
            raise InvalidPartition(f"{format_path(path)!r} is not a leaf")
        normalized: list[tuple[str, set[str]]] = []
        names: set[str] = set()
        claimed: set[str] = set()
        for name, members in parts:
            check_name(name)
            if name in names:
                raise InvalidPartition(f"duplicate part name {name!r}")
            names.add(name)
            members = set(members)
            if members & claimed:
                raise InvalidPartition("parts overlap")
            claimed |= members
            normalized.append((name, members))
        holders = set(self.images_at(path))
        if claimed != holders:
            raise InvalidPartition(
                "parts must cover exactly the images labeled at the path"
            )
        for name, members in normalized:
            node.children.append(TaxonNode(name, origin=origin))
            for uuid in members:
                a = self.labels[uuid]
                a.paths.discard(path)
                a.paths.add(path + (name,))
        self._log_op(
            "apply_partition",
            {
                "path": list(path),
                "parts": [
                    {"name": name, "members": sorted(members)}
                    for name, members in normalized
                ],
                "origin": origin,
            },
        )

    def flatten_taxon(self, path: Iterable[str]) -> None:
        """Remove all descendants of ``path``; their images move up to it."""
        path = as_path(path)
        if not path:
            raise RootOperand("cannot flatten the root")
        node = self.node_at(path)
        if node.is_leaf():
            raise NothingToFlatten(f"{format_path(path)!r} has no children")
        node.children = []
        n = len(path)
        for a in self.labels.values():
            if any(len(p) > n and p[:n] == path for p in a.paths):
                a.paths = {path if len(p) > n and p[:n] == path else p for p in a.paths}
        self._log_op("flatten_taxon", {"path": list(path)})

    def merge_taxa(self, source: Iterable[str], target: Iterable[str]) -> None:
        """Fold leaf ``source`` into leaf ``target`` and drop ``source``."""
        source = as_path(source)
        target = as_path(target)
        if source == target:
            raise SelfMerge("cannot merge a taxon with itself")
        if not source or not target:
            raise RootOperand("cannot merge the root")
        src_node = self.node_at(source)
        dst_node = self.node_at(target)
        if not src_node.is_leaf() or not dst_node.is_leaf():
            raise NonLeafMerge("merge operands must both be leaves")
        for a in self.labels.values():
            if source in a.paths:
                a.paths.discard(source)
                a.paths.add(target)
        parent = self.node_at(source[:-1])
        parent.children.remove(src_node)
        self._log_op(
            "merge_taxa", {"source": list(source), "target": list(target)}
        )

    def move_taxon(self, path: Iterable[str], new_parent: Iterable[str]) -> None:
        """Reparent the subtree at ``path`` under ``new_parent`` (appended last)."""
        path = as_path(path)
        new_parent = as_path(new_parent)
        if not path:
            raise RootOperand("cannot move the root")
        node = self.node_at(path)
        if new_parent[: len(path)] == path:
            raise CyclicMove(
                f"cannot move {format_path(path)!r} under its own subtree"
            )
        parent_node = self.node_at(new_parent)
        old_parent = self.node_at(path[:-1])
        same_parent = new_parent == path[:-1]
        clash = parent_node.child(node.name)
        if clash is not None and clash is not node:
            raise DuplicateSibling(
                f"{format_path(new_parent)!r} already has a child {node.name!r}"
            )
        was_leaf = parent_node.is_leaf()
        old_parent.children.remove(node)
        parent_node.children.append(node)
        new_path = new_parent + (node.name,)
        if new_path != path:
            self._rewrite_prefix(path, new_path)
        if was_leaf and not same_parent:
            self._migrate_if_first_child(new_parent, node.name)
        self._log_op(
            "move_taxon", {"path": list(path), "new_parent": list(new_parent)}
        )

    def rename_taxon(self, path: Iterable[str], new_name: str) -> None:
        """Rename the node at ``path``; label paths through it follow."""
        path = as_path(path)
        if not path:
            raise RootOperand("cannot rename the root")
        check_name(new_name)
        node = self.node_at(path)
        parent = self.node_at(path[:-1])
        clash = parent.child(new_name)
        if clash is not None and clash is not node:
            raise DuplicateSibling(
                f"{format_path(path[:-1])!r} already has a child {new_name!r}"
            )
        node.name = new_name
        new_path = path[:-1] + (new_name,)
        if new_path != path:
            self._rewrite_prefix(path, new_path)
        self._log_op("rename_taxon", {"path": list(path), "new_name": new_name})

    def remove_taxon(self, path: Iterable[str]) -> None:
        """Delete the subtree at ``path``; orphaned images park in ungrouped."""
        path = as_path(path)
        if not path:
            raise CannotRemoveRoot("cannot remove the root")
        node = self.node_at(path)
        if path == (UNGROUPED,) and any(
            p[:1] == path for a in self.labels.values() for p in a.paths
        ):
            raise CannotRemoveUngrouped(
                "root-level 'ungrouped' still holds images"
            )
        parent = self.node_at(path[:-1])
        n = len(path)
        orphans: list[LabelAssignment] = []
        for a in self.labels.values():
            if any(p[:n] == path for p in a.paths):
                a.paths = {p for p in a.paths if p[:n] != path}
                if not a.paths:
                    orphans.append(a)
        parent.children.remove(node)
        if orphans:
            park = self._parking_path()
            for a in orphans:
                a.paths.add(park)
        self._log_op("remove_taxon", {"path": list(path)})

    def label_image(self, uuid: str, leaf: Iterable[str]) -> None:
        """Assign an image to a leaf taxon (multi-label)."""
        leaf = as_path(leaf)
        a = self.labels.get(uuid)
        if a is None:
            raise NoSuchImage(f"image {uuid!r} is not loaded")
        if not leaf:
            raise NonLeafLabel("the root is never a label")
        if not self.node_at(leaf).is_leaf():
            raise NonLeafLabel(f"{format_path(leaf)!r} is not a leaf")
        default = a.paths == {(UNGROUPED,)}
        a.paths.add(leaf)
        if default and leaf != (UNGROUPED,):
            a.paths.discard((UNGROUPED,))
        self._log_op("label_image", {"uuid": uuid, "leaf": list(leaf)})

    def unlabel_image(self, uuid: str, leaf: Iterable[str]) -> None:
        """Drop one assignment; an image never ends up without labels."""
        leaf = as_path(leaf)
        a = self.labels.get(uuid)
        if a is None or leaf not in a.paths:
            raise NoSuchAssignment(
                f"image {uuid!r} is not assigned to {format_path(leaf)!r}"
            )
        a.paths.discard(leaf)
        if not a.paths:
            a.paths.add(self._parking_path())
        self._log_op("unlabel_image", {"uuid": uuid, "leaf": list(leaf)})

    def set_unsure(self, uuid: str, flag: bool) -> None:
        a = self.labels.get(uuid)
        if a is None:
            raise NoSuchImage(f"image {uuid!r} is not loaded")
        a.unsure = bool(flag)
        self._log_op("set_unsure", {"uuid": uuid, "flag": bool(flag)})

    def set_note(self, path: Iterable[str], note: str | None) -> None:
        """Attach a free-text memo to a taxon (None clears it)."""
        path = as_path(path)
        node = self.node_at(path)
        node.note = note
        self._log_op("set_note", {"path": list(path), "note": note})

    def add_memo(self, text: str) -> None:
        """Append to the session-level memo log."""
        self.memos.append(str(text))
        self._log_op("add_memo", {"text": str(text)})

    # -- reads ------------------------------------------------------------------

    def query_images(
        self,
        taxon: Iterable[str] | None = None,
        keyword: str | None = None,
        uuid: str | None = None,
        records: Mapping[str, ImageRecord] | None = None,
    ) -> list[str]:
        """Filter loaded images; exactly one filter must be given.

        A taxon filter matches by path prefix, so internal nodes aggregate
        their descendants.  Keyword search needs corpus ``records`` for the
        display names.  Results keep load order.
        """
        given = [x is not None for x in (taxon, keyword, uuid)]
        if sum(given) != 1:
            raise ValueError("exactly one of taxon/keyword/uuid is required")
        if uuid is not None:
            return [uuid] if uuid in self.labels else []
        if taxon is not None:
            f = as_path(taxon)
            n = len(f)
            return [
                u
                for u, a in self.labels.items()
                if any(p[:n] == f for p in a.paths)
            ]
        needle = keyword.lower()
        out = []
        for u in self.labels:
            rec = records.get(u) if records else None
            name = rec.display_name if rec else None
            if name and needle in name.lower():
                out.append(u)
        return out

    # -- replay ------------------------------------------------------------------

    def apply_op(self, op: str, args: Mapping[str, Any]) -> None:
        """Apply one operator from its wire/log encoding."""
        if op not in MUTATING_OPS:
            raise CorruptLog(f"unknown operator {op!r}")
        try:
            _DISPATCH[op](self, args)
        except KeyError as exc:
            raise CorruptLog(f"missing argument for {op}: {exc}") from exc

    @classmethod
    def replay(
        cls, log: Sequence[Mapping[str, Any]], session_id: str, coder_id: str
    ) -> "CoderSession":
        """Rebuild a session from its log; equals the state that produced it."""
        session = cls(session_id, coder_id)
        for i, entry in enumerate(log):
            if entry.get("version") != i + 1:
                raise CorruptLog(
                    f"log entry {i} has version {entry.get('version')!r}, "
                    f"expected {i + 1}"
                )
            try:
                session.apply_op(entry["op"], entry["args"])
            except CorruptLog:
                raise
            except TaxaError as exc:
                raise CorruptLog(
                    f"log entry {i} ({entry['op']}) fails its precondition: {exc}"
                ) from exc
        return session


def create_session(coder_id: str, session_id: str | None = None) -> CoderSession:
    """Fresh session: a bare root, no images, version 0."""
    return CoderSession(session_id if session_id is not None else coder_id, coder_id)


_DISPATCH = {
    "load_batch": lambda s, a: s.load_batch(list(a["uuids"])),
    "create_taxon": lambda s, a: s.create_taxon(a["parent"], a["name"]),
    "apply_partition": lambda s, a: s.apply_partition(
        a["path"],
        [(p["name"], p["members"]) for p in a["parts"]],
        a.get("origin", ORIGIN_MACHINE),
    ),
    "flatten_taxon": lambda s, a: s.flatten_taxon(a["path"]),
    "merge_taxa": lambda s, a: s.merge_taxa(a["source"], a["target"]),
    "move_taxon": lambda s, a: s.move_taxon(a["path"], a["new_parent"]),
    "rename_taxon": lambda s, a: s.rename_taxon(a["path"], a["new_name"]),
    "remove_taxon": lambda s, a: s.remove_taxon(a["path"]),
    "label_image": lambda s, a: s.label_image(a["uuid"], a["leaf"]),
    "unlabel_image": lambda s, a: s.unlabel_image(a["uuid"], a["leaf"]),
    "set_unsure": lambda s, a: s.set_unsure(a["uuid"], a["flag"]),
    "set_note": lambda s, a: s.set_note(a["path"], a.get("note")),
    "add_memo": lambda s, a: s.add_memo(a["text"]),
}
