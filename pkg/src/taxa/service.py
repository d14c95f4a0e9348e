"""HTTP facade over sessions, comparison, assistance, and prediction.

The service adds no taxonomy semantics: every mutation is an operator
envelope applied to the in-memory session under a per-session lock, with
optimistic concurrency on the session version, and every accepted mutation
is persisted atomically so a restart loses nothing.
"""

from __future__ import annotations

import json
import threading
import uuid as uuidlib
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles

from . import compare as cmp
from .assist import EmbeddingTable, cluster_taxon
from .errors import (
    MissingEmbedding,
    NoSuchSession,
    TaxaError,
    VersionConflict,
)
from .model import (
    MUTATING_OPS,
    CoderSession,
    ImageRecord,
    TaxonNode,
    create_session,
    parse_path,
)
from .predict import similarity_predict, zero_shot_predict
from .storage import (
    load_captions,
    load_dataset,
    load_embeddings,
    load_probabilities,
    load_session,
    read_session,
    save_session,
    write_session,
)


@dataclass
class ServiceConfig:
    data_dir: Path
    dataset_path: Path | None = None
    embeddings_path: Path | None = None
    captions_path: Path | None = None
    probs_path: Path | None = None
    images_dir: Path | None = None
    cors_origin: str | None = None
    ui_dir: Path | None = None


def tree_doc(node: TaxonNode) -> dict[str, Any]:
    return {
        "name": node.name,
        "origin": node.origin,
        "note": node.note,
        "children": [tree_doc(c) for c in node.children],
    }


def labels_doc(session: CoderSession) -> dict[str, Any]:
    return {
        uuid: {
            "paths": sorted(list(p) for p in a.paths),
            "unsure": a.unsure,
        }
        for uuid, a in session.labels.items()
    }


def _session_doc(session: CoderSession, with_log: bool = False) -> dict[str, Any]:
    doc = {
        "session_id": session.session_id,
        "coder_id": session.coder_id,
        "version": session.version,
        "tree": tree_doc(session.root),
        "labels": labels_doc(session),
        "image_order": list(session.labels),
        "memos": list(session.memos),
    }
    if with_log:
        doc["log"] = list(session.log)
    return doc


def _metrics_doc(report: cmp.MetricsReport) -> dict[str, Any]:
    def num(x: Fraction | None) -> float | None:
        return None if x is None else float(x)

    return {
        "exact_match": num(report.exact_match),
        "jaccard": num(report.jaccard),
        "node_iou": num(report.node_iou),
        "depth": report.depth,
        "n_images": report.n_images,
    }


class SessionStore:
    """Disk-backed session registry; one writer lock per session."""

    def __init__(self, directory: Path):
        self.directory = directory
        self.directory.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, CoderSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        for path in sorted(self.directory.glob("*.json")):
            session = read_session(path)
            self.sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()

    def _path(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.json"

    def create(self, coder_id: str, session_id: str | None = None) -> CoderSession:
        with self._registry_lock:
            sid = session_id or uuidlib.uuid4().hex[:12]
            if sid in self.sessions:
                raise TaxaError(f"session {sid!r} already exists")
            session = create_session(coder_id, session_id=sid)
            self.sessions[sid] = session
            self._locks[sid] = threading.Lock()
        write_session(session, self._path(sid))
        return session

    def lock(self, session_id: str) -> threading.Lock:
        lock = self._locks.get(session_id)
        if lock is None:
            raise NoSuchSession(f"no session {session_id!r}")
        return lock

    def get(self, session_id: str) -> CoderSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise NoSuchSession(f"no session {session_id!r}")
        return session

    def persist(self, session: CoderSession) -> None:
        write_session(session, self._path(session.session_id))


_STATUS = {
    "NoSuchSession": 404,
    "NoSuchImage": 404,
    "NoSuchTaxon": 404,
    "VersionConflict": 409,
}


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="taxa", docs_url=None, redoc_url=None)
    store = SessionStore(config.data_dir / "sessions")

    records: dict[str, ImageRecord] = {}
    if config.dataset_path:
        records = {r.uuid: r for r in load_dataset(config.dataset_path)}
    embeddings: EmbeddingTable | None = (
        load_embeddings(config.embeddings_path) if config.embeddings_path else None
    )
    captions: dict[str, str] = (
        load_captions(config.captions_path) if config.captions_path else {}
    )
    prob_rows = (
        load_probabilities(config.probs_path) if config.probs_path else None
    )

    if config.cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[config.cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(TaxaError)
    async def _taxa_error(request: Request, exc: TaxaError):
        details: dict[str, Any] = {}
        if isinstance(exc, VersionConflict):
            details = {"expected": exc.expected, "current_version": exc.current}
        if isinstance(exc, MissingEmbedding):
            details = {"uuid": exc.uuid}
        return JSONResponse(
            status_code=_STATUS.get(exc.code, 400),
            content={"code": exc.code, "message": str(exc), "details": details},
        )

    @app.get("/api/health")
    def health():
        return {"status": "ok", "sessions": len(store.sessions)}

    @app.post("/api/sessions", status_code=201)
    def create_session_endpoint(body: dict):
        session = store.create(
            str(body.get("coder_id", "")), body.get("session_id")
        )
        return {
            "session_id": session.session_id,
            "coder_id": session.coder_id,
            "version": session.version,
        }

    @app.get("/api/sessions")
    def list_sessions():
        out = []
        for sid in sorted(store.sessions):
            s = store.sessions[sid]
            out.append(
                {
                    "session_id": sid,
                    "coder_id": s.coder_id,
                    "version": s.version,
                    "n_images": len(s.labels),
                }
            )
        return {"sessions": out}

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str, log: bool = False):
        with store.lock(session_id):
            return _session_doc(store.get(session_id), with_log=log)

    @app.post("/api/sessions/{session_id}/ops")
    def apply_op(session_id: str, body: dict):
        op = body.get("op")
        args = body.get("args", {})
        expected = body.get("expected_version")
        if op not in MUTATING_OPS or not isinstance(args, dict):
            return JSONResponse(
                status_code=400,
                content={
                    "code": "UnknownOperator",
                    "message": f"op must be one of {sorted(MUTATING_OPS)}",
                    "details": {"op": op},
                },
            )
        if not isinstance(expected, int) or expected < 0:
            return JSONResponse(
                status_code=400,
                content={
                    "code": "BadRequest",
                    "message": "expected_version must be a non-negative integer",
                    "details": {},
                },
            )
        with store.lock(session_id):
            session = store.get(session_id)
            if expected != session.version:
                raise VersionConflict(expected, session.version)
            before = {
                u: (tuple(sorted(a.paths)), a.unsure)
                for u, a in session.labels.items()
            }
            session.apply_op(op, args)
            store.persist(session)
            changed = {}
            for u, a in session.labels.items():
                now = (tuple(sorted(a.paths)), a.unsure)
                if before.get(u) != now:
                    changed[u] = {
                        "paths": sorted(list(p) for p in a.paths),
                        "unsure": a.unsure,
                    }
            return {
                "version": session.version,
                "delta": {"tree": tree_doc(session.root), "labels": changed},
            }

    @app.get("/api/sessions/{session_id}/images")
    def query_images(
        session_id: str,
        taxon: str | None = None,
        q: str | None = None,
        uuid: str | None = None,
    ):
        with store.lock(session_id):
            session = store.get(session_id)
            given = [x for x in (taxon, q, uuid) if x is not None]
            if len(given) != 1:
                return JSONResponse(
                    status_code=400,
                    content={
                        "code": "BadRequest",
                        "message": "give exactly one of taxon=, q=, uuid=",
                        "details": {},
                    },
                )
            if taxon is not None:
                uuids = session.query_images(taxon=parse_path(taxon))
            elif q is not None:
                uuids = session.query_images(keyword=q, records=records)
            else:
                uuids = session.query_images(uuid=uuid)
            return {"uuids": uuids, "version": session.version}

    @app.post("/api/sessions/{session_id}/assist/divide")
    def assist_divide(session_id: str, body: dict):
        if embeddings is None:
            return JSONResponse(
                status_code=400,
                content={
                    "code": "MissingEmbedding",
                    "message": "server started without an embeddings table",
                    "details": {},
                },
            )
        path = tuple(body.get("path", []))
        seed = int(body.get("seed", 0))
        with store.lock(session_id):
            session = store.get(session_id)
            missing = [
                u for u in session.images_at(path) if u not in embeddings
            ]
            if missing:
                return JSONResponse(
                    status_code=400,
                    content={
                        "code": "MissingEmbedding",
                        "message": f"{len(missing)} images have no embedding",
                        "details": {"missing": missing},
                    },
                )
            partition = cluster_taxon(session, path, embeddings, captions, seed)
            return {
                "version": session.version,
                "parts": [
                    {
                        "name": p.name,
                        "members": sorted(p.members),
                        "representative": p.representative,
                        "caption": p.caption,
                    }
                    for p in partition.parts
                ],
            }

    def _resolve_sessions(body: dict) -> list[CoderSession]:
        sessions: list[CoderSession] = []
        ids = body.get("session_ids", [])
        docs = body.get("sessions", [])
        if not isinstance(ids, list) or not isinstance(docs, list):
            raise TaxaError("session_ids and sessions must be lists")
        for sid in ids:
            with store.lock(sid):
                # snapshot through the codec so later mutations cannot race
                sessions.append(load_session(save_session(store.get(sid))))
        for doc in docs:
            sessions.append(load_session(json.dumps(doc).encode("utf-8")))
        if not sessions:
            raise TaxaError("no sessions given")
        return sessions

    @app.post("/api/compare")
    def handle_compare(body: dict):
        sessions = _resolve_sessions(body)
        merged = cmp.union_merge(sessions)
        tree, labels = cmp.majority_merge(sessions)
        warnings = list(merged.warnings)

        metrics = None
        if len(sessions) >= 2:
            shared = set(sessions[0].labels)
            for s in sessions[1:]:
                shared &= set(s.labels)
            labelings = [
                {u: set(s.labels[u].paths) for u in shared} for s in sessions
            ]
            metrics = cmp.MetricsReport(
                exact_match=cmp.exact_match_ratio(labelings),
                jaccard=cmp.pairwise_jaccard(labelings),
                node_iou=cmp.node_iou([s.root for s in sessions]),
                n_images=len(shared),
            )
            if warnings:
                warnings.append(
                    f"metrics restricted to the {len(shared)} shared images"
                )
        return {
            "coders": merged.coders,
            "union": {
                "nodes": [
                    {
                        "path": list(node.path),
                        "creators": node.creators,
                        "consensus_count": node.consensus_count,
                        "partial_count": node.partial_count,
                        "assigned": {
                            c: sorted(u) for c, u in node.assigned.items()
                        },
                    }
                    for _, node in sorted(merged.nodes.items())
                ],
                "child_order": {
                    "/".join(path): names
                    for path, names in merged.child_order.items()
                },
            },
            "majority": {
                "tree": tree_doc(tree),
                "labels": {
                    u: sorted(list(p) for p in paths)
                    for u, paths in labels.items()
                },
            },
            "metrics": _metrics_doc(metrics) if metrics else None,
            "dissensus": cmp.dissensus_images(sessions),
            "unsure": cmp.unsure_images(sessions),
            "warnings": warnings,
        }

    @app.post("/api/merge/majority")
    def handle_majority(body: dict):
        sessions = _resolve_sessions(body)
        tree, labels = cmp.majority_merge(sessions)
        return {
            "tree": tree_doc(tree),
            "labels": {
                u: sorted(list(p) for p in paths) for u, paths in labels.items()
            },
        }

    @app.post("/api/predict")
    def handle_predict(body: dict):
        method = body.get("method", "similarity")
        if method == "similarity":
            if embeddings is None:
                raise TaxaError("server started without an embeddings table")
            sid = body.get("session_id")
            if sid is not None:
                with store.lock(sid):
                    labeled = store.get(sid).label_sets()
            else:
                labeled = {
                    u: {tuple(p) for p in paths}
                    for u, paths in body.get("labeled", {}).items()
                }
            targets = body.get("targets")
            if targets is None:
                targets = sorted(set(embeddings.vectors) - set(labeled))
            predicted = similarity_predict(labeled, embeddings, targets)
        elif method == "zeroshot":
            rows = prob_rows
            if rows is None:
                raise TaxaError("server started without a probabilities table")
            uuids = body.get("uuids")
            if uuids is not None:
                wanted = set(uuids)
                rows = [r for r in rows if r.uuid in wanted]
            predicted = zero_shot_predict(
                rows, float(body.get("threshold", 0.3))
            )
        else:
            raise TaxaError(f"unknown prediction method {method!r}")
        return {
            "method": method,
            "labels": {
                u: sorted(list(p) for p in paths)
                for u, paths in predicted.items()
            },
        }

    @app.get("/api/images/{uuid}/file")
    def image_file(uuid: str):
        record = records.get(uuid)
        if record is None:
            return JSONResponse(
                status_code=404,
                content={
                    "code": "NoSuchImage",
                    "message": f"unknown image {uuid!r}",
                    "details": {},
                },
            )
        fields = record.source_fields
        for key in ("fileName", "file", "path"):
            name = fields.get(key)
            if isinstance(name, str):
                base = config.images_dir or config.data_dir
                candidate = (base / name).resolve()
                if candidate.is_file():
                    return FileResponse(candidate)
        for key in ("viewUrl", "url", "downloadUrl"):
            url = fields.get(key)
            if isinstance(url, str):
                return RedirectResponse(url, status_code=307)
        return JSONResponse(
            status_code=404,
            content={
                "code": "NoSuchImage",
                "message": f"no file or URL recorded for {uuid!r}",
                "details": {},
            },
        )

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount(
            "/", StaticFiles(directory=config.ui_dir, html=True), name="ui"
        )

    return app
