from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from taxa.model import CoderSession, create_session
from taxa.service import ServiceConfig, create_app
from taxa.storage import read_session, save_session

FIXTURES = Path(__file__).parent.parent / "fixtures"


@pytest.fixture
def app_env(tmp_path):
    config = ServiceConfig(
        data_dir=tmp_path,
        dataset_path=FIXTURES / "dataset.json",
        embeddings_path=FIXTURES / "embeddings.jsonl",
        captions_path=FIXTURES / "captions.jsonl",
        probs_path=FIXTURES / "probs.jsonl",
        images_dir=FIXTURES / "images",
    )
    return config, create_app(config)


@pytest.fixture
def client(app_env):
    _, app = app_env
    with TestClient(app) as c:
        yield c


def new_session(client, coder="C1"):
    resp = client.post("/api/sessions", json={"coder_id": coder})
    assert resp.status_code == 201
    return resp.json()["session_id"]


def apply(client, sid, op, args, expected):
    return client.post(
        f"/api/sessions/{sid}/ops",
        json={"op": op, "args": args, "expected_version": expected},
    )


class TestSessions:
    def test_create_and_fetch(self, client):
        sid = new_session(client)
        doc = client.get(f"/api/sessions/{sid}").json()
        assert doc["version"] == 0
        assert doc["tree"]["name"] == "root"
        assert doc["labels"] == {}

    def test_missing_session_404(self, client):
        resp = client.get("/api/sessions/nope")
        assert resp.status_code == 404
        assert resp.json()["code"] == "NoSuchSession"

    def test_empty_coder_id_rejected(self, client):
        resp = client.post("/api/sessions", json={"coder_id": ""})
        assert resp.status_code == 400
        assert resp.json()["code"] == "EmptyCoderId"

    def test_mutation_bumps_version_and_returns_delta(self, client):
        sid = new_session(client)
        resp = apply(client, sid, "load_batch", {"uuids": ["img-000"]}, 0)
        assert resp.status_code == 200
        body = resp.json()
        assert body["version"] == 1
        assert body["delta"]["labels"]["img-000"]["paths"] == [["ungrouped"]]
        resp = apply(client, sid, "create_taxon", {"parent": [], "name": "map"}, 1)
        assert resp.json()["version"] == 2

    def test_version_conflict(self, client):
        sid = new_session(client)
        apply(client, sid, "load_batch", {"uuids": ["img-000"]}, 0)
        resp = apply(client, sid, "load_batch", {"uuids": ["img-001"]}, 0)
        assert resp.status_code == 409
        body = resp.json()
        assert body["code"] == "VersionConflict"
        assert body["details"]["current_version"] == 1

    def test_operator_error_passthrough(self, client):
        sid = new_session(client)
        apply(client, sid, "load_batch", {"uuids": ["img-000"]}, 0)
        apply(client, sid, "create_taxon", {"parent": [], "name": "map"}, 1)
        apply(client, sid, "create_taxon", {"parent": ["map"], "name": "x"}, 2)
        resp = apply(
            client, sid, "label_image", {"uuid": "img-000", "leaf": ["map"]}, 3
        )
        assert resp.status_code == 400
        assert resp.json()["code"] == "NonLeafLabel"

    def test_unknown_operator_rejected(self, client):
        sid = new_session(client)
        resp = apply(client, sid, "explode", {}, 0)
        assert resp.status_code == 400
        assert resp.json()["code"] == "UnknownOperator"

    def test_sessions_persist_across_restart(self, app_env, tmp_path):
        config, app = app_env
        with TestClient(app) as client:
            sid = new_session(client)
            apply(client, sid, "load_batch", {"uuids": ["img-000"]}, 0)
        reloaded = create_app(config)
        with TestClient(reloaded) as client:
            doc = client.get(f"/api/sessions/{sid}").json()
            assert doc["version"] == 1
            assert "img-000" in doc["labels"]

    def test_list_sessions(self, client):
        a = new_session(client, "C1")
        b = new_session(client, "C2")
        listed = client.get("/api/sessions").json()["sessions"]
        assert {s["session_id"] for s in listed} == {a, b}


class TestQueryEndpoint:
    def test_taxon_and_keyword_and_uuid(self, client):
        sid = new_session(client)
        apply(client, sid, "load_batch", {"uuids": ["img-000", "img-001"]}, 0)
        apply(client, sid, "create_taxon", {"parent": [], "name": "map"}, 1)
        apply(
            client, sid, "label_image", {"uuid": "img-000", "leaf": ["map"]}, 2
        )
        r = client.get(f"/api/sessions/{sid}/images", params={"taxon": "map"})
        assert r.json()["uuids"] == ["img-000"]
        r = client.get(f"/api/sessions/{sid}/images", params={"q": "REGION"})
        assert r.json()["uuids"] == ["img-000"]  # display name from dataset
        r = client.get(f"/api/sessions/{sid}/images", params={"uuid": "img-001"})
        assert r.json()["uuids"] == ["img-001"]

    def test_exactly_one_filter(self, client):
        sid = new_session(client)
        r = client.get(
            f"/api/sessions/{sid}/images", params={"taxon": "a", "q": "b"}
        )
        assert r.status_code == 400


class TestAssistDivide:
    def test_preview_is_side_effect_free_and_deterministic(self, client):
        sid = new_session(client)
        uuids = [f"img-{i:03d}" for i in range(9)]
        apply(client, sid, "load_batch", {"uuids": uuids}, 0)
        before = client.get(f"/api/sessions/{sid}").json()
        r1 = client.post(
            f"/api/sessions/{sid}/assist/divide",
            json={"path": ["ungrouped"], "seed": 5},
        )
        r2 = client.post(
            f"/api/sessions/{sid}/assist/divide",
            json={"path": ["ungrouped"], "seed": 5},
        )
        assert r1.status_code == 200
        assert len(r1.json()["parts"]) == 3  # floor(sqrt(9))
        assert r1.json() == r2.json()
        assert client.get(f"/api/sessions/{sid}").json() == before
        for part in r1.json()["parts"]:
            assert part["representative"] in part["members"]
            assert part["caption"]

    def test_missing_embeddings_listed_per_uuid(self, client):
        sid = new_session(client)
        apply(client, sid, "load_batch", {"uuids": ["img-000", "ghost-1", "ghost-2"]}, 0)
        resp = client.post(
            f"/api/sessions/{sid}/assist/divide",
            json={"path": ["ungrouped"], "seed": 0},
        )
        assert resp.status_code == 400
        body = resp.json()
        assert body["code"] == "MissingEmbedding"
        assert body["details"]["missing"] == ["ghost-1", "ghost-2"]

    def test_commit_with_edited_names(self, client):
        sid = new_session(client)
        uuids = [f"img-{i:03d}" for i in range(4)]
        apply(client, sid, "load_batch", {"uuids": uuids}, 0)
        preview = client.post(
            f"/api/sessions/{sid}/assist/divide",
            json={"path": ["ungrouped"], "seed": 0},
        ).json()
        parts = [
            {"name": f"edited-{i}", "members": p["members"]}
            for i, p in enumerate(preview["parts"])
        ]
        resp = apply(
            client,
            sid,
            "apply_partition",
            {"path": ["ungrouped"], "parts": parts, "origin": "machine-cluster"},
            1,
        )
        assert resp.status_code == 200
        tree = client.get(f"/api/sessions/{sid}").json()["tree"]
        ungrouped = tree["children"][0]
        assert [c["name"] for c in ungrouped["children"]] == [
            p["name"] for p in parts
        ]


class TestCompareEndpoints:
    def test_compare_matches_library(self, client):
        body = {
            "sessions": [
                json.loads((FIXTURES / f"session-{c}.json").read_text())
                for c in ("c1", "c2", "c3")
            ]
        }
        resp = client.post("/api/compare", json=body)
        assert resp.status_code == 200
        out = resp.json()

        from taxa import compare as cmplib

        sessions = [
            read_session(FIXTURES / f"session-{c}.json")
            for c in ("c1", "c2", "c3")
        ]
        assert out["dissensus"] == cmplib.dissensus_images(sessions)
        assert out["unsure"] == cmplib.unsure_images(sessions)
        report = cmplib.agreement_report(sessions)
        assert out["metrics"]["exact_match"] == pytest.approx(
            float(report.exact_match)
        )
        assert out["metrics"]["jaccard"] == pytest.approx(float(report.jaccard))
        assert out["metrics"]["node_iou"] == pytest.approx(
            float(report.node_iou)
        )
        union_paths = {tuple(n["path"]) for n in out["union"]["nodes"]}
        assert union_paths == set(cmplib.union_merge(sessions).nodes)

    def test_single_session_compare(self, client):
        body = {
            "sessions": [
                json.loads((FIXTURES / "session-c1.json").read_text())
            ]
        }
        out = client.post("/api/compare", json=body).json()
        assert out["metrics"] is None
        assert out["dissensus"] == []
        s1 = read_session(FIXTURES / "session-c1.json")
        from taxa.compare import union_merge

        assert {tuple(n["path"]) for n in out["union"]["nodes"]} == set(
            union_merge([s1]).nodes
        )

    def test_differing_corpora_warns_and_restricts(self, client):
        a = create_session("A")
        a.load_batch(["u1", "u2"])
        b = create_session("B")
        b.load_batch(["u1"])
        body = {
            "sessions": [
                json.loads(save_session(a)),
                json.loads(save_session(b)),
            ]
        }
        out = client.post("/api/compare", json=body).json()
        assert out["warnings"]
        assert out["metrics"]["n_images"] == 1

    def test_majority_endpoint(self, client):
        body = {
            "sessions": [
                json.loads((FIXTURES / f"session-{c}.json").read_text())
                for c in ("c1", "c2", "c3")
            ]
        }
        out = client.post("/api/merge/majority", json=body).json()
        sessions = [
            read_session(FIXTURES / f"session-{c}.json")
            for c in ("c1", "c2", "c3")
        ]
        from taxa.compare import majority_merge
        from taxa.model import tree_paths

        tree, labels = majority_merge(sessions)

        def doc_paths(doc, prefix=()):
            out_paths = []
            for child in doc["children"]:
                p = prefix + (child["name"],)
                out_paths.append(p)
                out_paths.extend(doc_paths(child, p))
            return out_paths

        assert set(doc_paths(out["tree"])) == set(tree_paths(tree))
        assert {
            u: {tuple(p) for p in ps} for u, ps in out["labels"].items()
        } == labels


class TestPredictEndpoint:
    def test_similarity_over_server_embeddings(self, client):
        sid = new_session(client)
        apply(client, sid, "load_batch", {"uuids": ["img-000", "img-001"]}, 0)
        apply(client, sid, "create_taxon", {"parent": [], "name": "map"}, 1)
        apply(
            client, sid, "label_image", {"uuid": "img-000", "leaf": ["map"]}, 2
        )
        apply(
            client,
            sid,
            "label_image",
            {"uuid": "img-001", "leaf": ["ungrouped"]},
            3,
        )
        resp = client.post(
            "/api/predict",
            json={
                "method": "similarity",
                "session_id": sid,
                "targets": ["img-004"],
            },
        )
        assert resp.status_code == 200
        # img-004 is another map-family image; nearest labeled is img-000
        assert resp.json()["labels"]["img-004"] == [["map"]]

    def test_zeroshot_threshold(self, client):
        resp = client.post(
            "/api/predict",
            json={"method": "zeroshot", "uuids": ["img-003"], "threshold": 0.3},
        )
        assert resp.status_code == 200
        labels = resp.json()["labels"]["img-003"]
        # fixture pins img-003's true-family probability at exactly 0.3
        assert ["non-visualization"] in labels


class TestImageFile:
    def test_serves_local_file(self, client):
        resp = client.get("/api/images/img-000/file")
        assert resp.status_code == 200
        assert resp.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unknown_image_404(self, client):
        assert client.get("/api/images/ghost/file").status_code == 404

    def test_redirects_when_no_local_file(self, tmp_path):
        dataset = tmp_path / "d.json"
        dataset.write_text(
            json.dumps([{"uuid": "web-1", "viewUrl": "https://example.org/x"}])
        )
        config = ServiceConfig(data_dir=tmp_path, dataset_path=dataset)
        with TestClient(create_app(config)) as c:
            resp = c.get("/api/images/web-1/file", follow_redirects=False)
            assert resp.status_code == 307
            assert resp.headers["location"] == "https://example.org/x"


class TestServiceEquivalence:
    def test_scripted_scenario_equals_direct_library(self, app_env, tmp_path):
        config, app = app_env
        script = [
            ("load_batch", {"uuids": [f"img-{i:03d}" for i in range(6)]}),
            ("create_taxon", {"parent": [], "name": "map"}),
            ("create_taxon", {"parent": [], "name": "bar chart"}),
            ("label_image", {"uuid": "img-000", "leaf": ["map"]}),
            ("label_image", {"uuid": "img-001", "leaf": ["bar chart"]}),
            ("rename_taxon", {"path": ["bar chart"], "new_name": "bars"}),
            ("set_unsure", {"uuid": "img-002", "flag": True}),
            ("move_taxon", {"path": ["bars"], "new_parent": ["map"]}),
            ("flatten_taxon", {"path": ["map"]}),
            ("remove_taxon", {"path": ["map"]}),
            ("add_memo", {"text": "pass one done"}),
        ]
        with TestClient(app) as client:
            sid = new_session(client, "EQ")
            for i, (op, args) in enumerate(script):
                resp = apply(client, sid, op, args, i)
                assert resp.status_code == 200, resp.text

        direct = create_session("EQ", session_id=sid)
        for op, args in script:
            direct.apply_op(op, args)

        stored = read_session(tmp_path / "sessions" / f"{sid}.json")
        assert stored.state_snapshot() == direct.state_snapshot()
        assert save_session(stored) == save_session(direct)
