"""File formats, corpus loading, and the disjoint batch sampler.

Sessions, datasets, labelings, and merge results are UTF-8 JSON; the
embedding/caption/probability tables are JSON Lines.  Session encoding is
canonical (sorted keys, two-space indent, ``\\n`` line endings, trailing
newline), so semantically equal sessions serialize to identical bytes and
``encode(decode(f)) == f`` for canonical files.
"""

from __future__ import annotations

import json
import os
import random
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .assist import EmbeddingTable
from .errors import (
    DimMismatch,
    DuplicateImage,
    FormatError,
    NotEnoughImages,
)
from .model import (
    CoderSession,
    ImageRecord,
    LabelAssignment,
    TaxonNode,
    TaxonPath,
    parse_path,
)
from .predict import ProbabilityRow

SESSION_FORMAT = "taxa-session"
LABELING_FORMAT = "taxa-labeling"
MERGED_FORMAT = "taxa-merged"
BATCH_PLAN_FORMAT = "taxa-batch-plan"
FORMAT_VERSION = 1


def dumps_canonical(doc: Any) -> bytes:
    """Canonical JSON bytes: sorted keys, 2-space indent, trailing newline."""
    text = json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False)
    return (text + "\n").encode("utf-8")


def _loads(data: bytes | str) -> Any:
    def reject_specials(token: str) -> float:
        raise FormatError(f"non-finite number {token!r} not allowed")

    try:
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return json.loads(data, parse_constant=reject_specials)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed JSON: {exc}") from exc


def atomic_write(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- sessions ---------------------------------------------------------------


def _tree_doc(node: TaxonNode) -> dict[str, Any]:
    return {
        "name": node.name,
        "origin": node.origin,
        "note": node.note,
        "children": [_tree_doc(c) for c in node.children],
    }


def _tree_from_doc(doc: Any) -> TaxonNode:
    if not isinstance(doc, dict) or not isinstance(doc.get("name"), str):
        raise FormatError("tree node must be an object with a string name")
    note = doc.get("note")
    if note is not None and not isinstance(note, str):
        raise FormatError("node note must be a string or null")
    origin = doc.get("origin", "manual")
    if origin not in ("manual", "machine-cluster"):
        raise FormatError(f"unknown node origin {origin!r}")
    children = doc.get("children", [])
    if not isinstance(children, list):
        raise FormatError("node children must be a list")
    node = TaxonNode(
        name=doc["name"],
        origin=origin,
        note=note,
        children=[_tree_from_doc(c) for c in children],
    )
    names = [c.name for c in node.children]
    if len(names) != len(set(names)):
        raise FormatError(f"duplicate sibling names under {node.name!r}")
    return node


def save_session(session: CoderSession) -> bytes:
    doc = {
        "format": SESSION_FORMAT,
        "format_version": FORMAT_VERSION,
        "session_id": session.session_id,
        "coder_id": session.coder_id,
        "tree": _tree_doc(session.root),
        "labels": [
            {
                "uuid": uuid,
                "paths": sorted(list(p) for p in a.paths),
                "unsure": a.unsure,
            }
            for uuid, a in session.labels.items()
        ],
        "memos": list(session.memos),
        "log": list(session.log),
    }
    return dumps_canonical(doc)


def load_session(data: bytes | str) -> CoderSession:
    doc = _loads(data)
    if not isinstance(doc, dict) or doc.get("format") != SESSION_FORMAT:
        raise FormatError("not a session document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"unsupported session format version {doc.get('format_version')!r}"
        )
    coder_id = doc.get("coder_id")
    if not isinstance(coder_id, str) or not coder_id:
        raise FormatError("coder_id must be a non-empty string")
    session_id = doc.get("session_id")
    if not isinstance(session_id, str):
        raise FormatError("session_id must be a string")
    session = CoderSession(session_id, coder_id)
    session.root = _tree_from_doc(doc.get("tree"))
    if session.root.name != "root":
        raise FormatError("tree root must be named 'root'")

    labels = doc.get("labels", [])
    if not isinstance(labels, list):
        raise FormatError("labels must be a list")
    for item in labels:
        try:
            uuid = item["uuid"]
            raw_paths = item["paths"]
            unsure = item["unsure"]
        except (TypeError, KeyError) as exc:
            raise FormatError(f"malformed label record: {exc}") from exc
        if not isinstance(uuid, str) or uuid in session.labels:
            raise FormatError(f"bad or duplicate label uuid {uuid!r}")
        if not isinstance(raw_paths, list) or not raw_paths:
            raise FormatError(f"image {uuid!r} must have at least one path")
        paths: set[TaxonPath] = set()
        for raw in raw_paths:
            if not isinstance(raw, list) or not all(
                isinstance(s, str) for s in raw
            ):
                raise FormatError(f"malformed path for image {uuid!r}")
            path = tuple(raw)
            if not path:
                raise FormatError("the empty path is never a label")
            try:
                node = session.node_at(path)
            except Exception:
                raise FormatError(
                    f"label path {'/'.join(path)!r} not in tree"
                ) from None
            if not node.is_leaf():
                raise FormatError(
                    f"label path {'/'.join(path)!r} is not a leaf"
                )
            paths.add(path)
        session.labels[uuid] = LabelAssignment(uuid, paths, bool(unsure))

    memos = doc.get("memos", [])
    if not isinstance(memos, list) or not all(isinstance(m, str) for m in memos):
        raise FormatError("memos must be a list of strings")
    session.memos = list(memos)

    log = doc.get("log", [])
    if not isinstance(log, list):
        raise FormatError("log must be a list")
    session.log = [dict(entry) for entry in log]
    return session


def write_session(session: CoderSession, path: str | Path) -> None:
    atomic_write(path, save_session(session))


def read_session(path: str | Path) -> CoderSession:
    return load_session(Path(path).read_bytes())


# -- dataset --------------------------------------------------------------------


def _publish_year(record: dict[str, Any]) -> int | None:
    for key in ("publishYear", "publish_year"):
        value = record.get(key)
        if isinstance(value, int):
            return value
    for key in ("publishDate", "publish_date"):
        value = record.get(key)
        if isinstance(value, str) and len(value) >= 4 and value[:4].isdigit():
            return int(value[:4])
    return None


def load_dataset(path: str | Path) -> list[ImageRecord]:
    """Parse a corpus metadata file into ImageRecords, preserving order."""
    doc = _loads(Path(path).read_bytes())
    if not isinstance(doc, list):
        raise FormatError("dataset must be a JSON list of records")
    records: list[ImageRecord] = []
    seen: set[str] = set()
    for item in doc:
        if not isinstance(item, dict) or not isinstance(item.get("uuid"), str):
            raise FormatError("every dataset record needs a string uuid")
        uuid = item["uuid"]
        if uuid in seen:
            raise DuplicateImage(f"duplicate dataset uuid {uuid!r}")
        seen.add(uuid)
        display = item.get("displayName", item.get("display_name"))
        if display is not None and not isinstance(display, str):
            raise FormatError(f"displayName of {uuid!r} must be a string")
        records.append(
            ImageRecord(
                uuid=uuid,
                display_name=display,
                publish_year=_publish_year(item),
                source_fields=dict(item),
            )
        )
    return records


# -- jsonl tables -------------------------------------------------------------------


def _iter_jsonl(path: str | Path) -> Iterable[tuple[int, dict[str, Any]]]:
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        doc = _loads(line)
        if not isinstance(doc, dict) or not isinstance(doc.get("uuid"), str):
            raise FormatError(f"line {lineno}: record needs a string uuid")
        yield lineno, doc


def load_embeddings(path: str | Path) -> EmbeddingTable:
    vectors: dict[str, list[float]] = {}
    dim: int | None = None
    for lineno, doc in _iter_jsonl(path):
        uuid = doc["uuid"]
        if uuid in vectors:
            raise DuplicateImage(f"line {lineno}: duplicate uuid {uuid!r}")
        vec = doc.get("vector")
        if not isinstance(vec, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in vec
        ):
            raise FormatError(f"line {lineno}: vector must be a number list")
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise DimMismatch(
                f"line {lineno}: vector has dim {len(vec)}, expected {dim}"
            )
        vectors[uuid] = vec
    return EmbeddingTable.from_dict(vectors)


def load_captions(path: str | Path) -> dict[str, str]:
    captions: dict[str, str] = {}
    for lineno, doc in _iter_jsonl(path):
        uuid = doc["uuid"]
        if uuid in captions:
            raise DuplicateImage(f"line {lineno}: duplicate uuid {uuid!r}")
        caption = doc.get("caption")
        if not isinstance(caption, str):
            raise FormatError(f"line {lineno}: caption must be a string")
        captions[uuid] = caption
    return captions


def load_probabilities(path: str | Path) -> list[ProbabilityRow]:
    rows: list[ProbabilityRow] = []
    seen: set[str] = set()
    for lineno, doc in _iter_jsonl(path):
        uuid = doc["uuid"]
        if uuid in seen:
            raise DuplicateImage(f"line {lineno}: duplicate uuid {uuid!r}")
        seen.add(uuid)
        probs = doc.get("probs")
        if not isinstance(probs, dict):
            raise FormatError(f"line {lineno}: probs must be an object")
        parsed: dict[TaxonPath, float] = {}
        for key, value in probs.items():
            if (
                not isinstance(value, (int, float))
                or isinstance(value, bool)
                or not 0.0 <= value <= 1.0
            ):
                raise FormatError(
                    f"line {lineno}: probability {value!r} outside [0, 1]"
                )
            path = parse_path(key)
            if not path or not all(s for s in path):
                raise FormatError(f"line {lineno}: bad leaf path {key!r}")
            parsed[path] = float(value)
        rows.append(ProbabilityRow(uuid=uuid, probs=parsed))
    return rows


def load_table(kind: str, path: str | Path):
    """Dispatch on table kind: embeddings | captions | probabilities."""
    loaders = {
        "embeddings": load_embeddings,
        "captions": load_captions,
        "probabilities": load_probabilities,
    }
    if kind not in loaders:
        raise ValueError(f"unknown table kind {kind!r}")
    return loaders[kind](path)


# -- labelings and merge results -----------------------------------------------------


def labeling_doc(labels: dict[str, set[TaxonPath]]) -> dict[str, Any]:
    return {
        "format": LABELING_FORMAT,
        "format_version": FORMAT_VERSION,
        "labels": {
            uuid: sorted(list(p) for p in paths)
            for uuid, paths in labels.items()
        },
    }


def load_labeling(path: str | Path) -> dict[str, set[TaxonPath]]:
    """Read label sets from a labeling, merged, or session document."""
    doc = _loads(Path(path).read_bytes())
    if isinstance(doc, dict) and doc.get("format") == SESSION_FORMAT:
        return read_session(path).label_sets()
    if isinstance(doc, dict) and doc.get("format") in (
        LABELING_FORMAT,
        MERGED_FORMAT,
    ):
        raw = doc.get("labels")
        if not isinstance(raw, dict):
            raise FormatError("labels must be an object")
        out: dict[str, set[TaxonPath]] = {}
        for uuid, raw_paths in raw.items():
            if not isinstance(raw_paths, list):
                raise FormatError(f"paths of {uuid!r} must be a list")
            paths = set()
            for p in raw_paths:
                if not isinstance(p, list) or not all(
                    isinstance(s, str) for s in p
                ):
                    raise FormatError(f"malformed path for {uuid!r}")
                paths.add(tuple(p))
            out[uuid] = paths
        return out
    raise FormatError("not a labeling-bearing document")


# -- batch sampling --------------------------------------------------------------------


@dataclass
class BatchPlan:
    seed: int
    batch_size: int
    batches: list[list[str]]

    def doc(self) -> dict[str, Any]:
        return {
            "format": BATCH_PLAN_FORMAT,
            "format_version": FORMAT_VERSION,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "batches": self.batches,
        }


def sample_batches(
    dataset: Sequence[ImageRecord] | Sequence[str],
    batch_size: int,
    n_batches: int,
    seed: int = 0,
) -> BatchPlan:
    """Disjoint random batches: seeded Fisher-Yates over sorted uuids, then
    consecutive slices."""
    if batch_size < 1 or n_batches < 1:
        raise ValueError("batch_size and n_batches must be >= 1")
    uuids = sorted(
        r.uuid if isinstance(r, ImageRecord) else r for r in dataset
    )
    if len(set(uuids)) != len(uuids):
        raise DuplicateImage("dataset contains duplicate uuids")
    if batch_size * n_batches > len(uuids):
        raise NotEnoughImages(
            f"{n_batches} batches of {batch_size} exceed corpus of {len(uuids)}"
        )
    rng = random.Random(seed)
    for i in range(len(uuids) - 1, 0, -1):
        j = rng.randrange(i + 1)
        uuids[i], uuids[j] = uuids[j], uuids[i]
    batches = [
        uuids[i * batch_size : (i + 1) * batch_size] for i in range(n_batches)
    ]
    return BatchPlan(seed=seed, batch_size=batch_size, batches=batches)
