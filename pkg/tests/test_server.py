from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from kgrex.aggregate import aggregate_by_category, aggregate_phase1
from kgrex.records import ExplanationRecord, read_annotations
from kgrex.rules import parse_rule, rule_id
from kgrex.server import ServerError, build_app, build_work_items
from kgrex.store import TypeCatalog

from conftest import make_store


@pytest.fixture
def small_world(tmp_path):
    store = make_store(
        [
            ("a", "/d0/t0/rel0", "b"),
            ("b", "/d0/t0/rel0", "c"),
            ("a", "/d1/t1/rel1", "b"),
            ("b", "/d1/t1/rel1", "c"),
            ("x", "/d2/t2/left./d9/t9/right", "y"),
        ]
    )
    rules = [
        parse_rule("?a /d0/t0/rel0 ?b => ?a /d1/t1/rel1 ?b", store),
        parse_rule("?a /d1/t1/rel1 ?b => ?a /d0/t0/rel0 ?b", store),
        parse_rule("?a /d2/t2/left./d9/t9/right ?b => ?a /d2/t2/left./d9/t9/right ?b", store),
    ]
    return store, rules


def explanations_for(store, rules, targets):
    records = []
    for rule in rules:
        rid = rule_id(rule, store)
        for strategy, model in targets:
            records.append(
                ExplanationRecord(
                    rule_id=rid,
                    strategy=strategy,
                    model=model,
                    text=f"Explanation of {rid} via {strategy}.",
                )
            )
    return records


PHASE2_TARGETS = [("zero_shot", "openai:m"), ("typed_zero_shot", "openai:m")]


def make_client(tmp_path, store, rules, phase=2, seed=3, tokens=None):
    records = explanations_for(store, rules, PHASE2_TARGETS)
    items = build_work_items(store, rules, records, phase, TypeCatalog({}), seed=seed)
    app = build_app(items, tmp_path / "annotations.jsonl", annotator_tokens=tokens)
    return TestClient(app), items


def full_body(session_id, item, target, preferred=None, correctness=4):
    return {
        "session_id": session_id,
        "item_id": item["item_id"],
        "target": target,
        "correctness": correctness,
        "clarity": 4,
        "m_ent": 0,
        "m_rel": 0,
        "h_ent": 0,
        "h_rel": 0,
        "logicalness": 2,
        **({"preferred": preferred} if preferred else {}),
    }


class TestWorkItems:
    def test_order_is_seed_deterministic(self, small_world):
        store, rules = small_world
        records = explanations_for(store, rules, PHASE2_TARGETS)
        once = build_work_items(store, rules, records, 2, seed=5)
        again = build_work_items(store, rules, records, 2, seed=5)
        other = build_work_items(store, rules, records, 2, seed=6)
        assert [i.item_id for i in once] == [i.item_id for i in again]
        assert [i.item_id for i in once] != [i.item_id for i in other]

    def test_phase1_requires_two_explanations(self, small_world):
        store, rules = small_world
        records = explanations_for(store, rules, [("zero_shot", "openai:m")])
        with pytest.raises(ServerError, match="exactly 2"):
            build_work_items(store, rules, records, 1)

    def test_items_carry_label_segments(self, small_world):
        store, rules = small_world
        records = explanations_for(store, rules, PHASE2_TARGETS)
        items = build_work_items(store, rules, records, 2)
        concat_item = next(
            i for i in items if "left./d9" in i.rule_text
        )
        segs = concat_item.label_segments["/d2/t2/left./d9/t9/right"]
        assert segs == ["d2", "t2", "left", "d9", "t9", "right"]


class TestSessionApi:
    def test_session_reused_per_annotator(self, tmp_path, small_world):
        client, _ = make_client(tmp_path, *small_world)
        s1 = client.post("/api/session", json={"annotator_id": "a1"}).json()
        s2 = client.post("/api/session", json={"annotator_id": "a1"}).json()
        assert s1["session_id"] == s2["session_id"]

    def test_unknown_session_rejected(self, tmp_path, small_world):
        client, _ = make_client(tmp_path, *small_world)
        assert client.get("/api/next", params={"session_id": "nope"}).status_code == 401

    def test_token_auth(self, tmp_path, small_world):
        client, _ = make_client(tmp_path, *small_world, tokens={"a1": "secret"})
        denied = client.post("/api/session", json={"annotator_id": "a1"})
        assert denied.status_code == 401
        ok = client.post("/api/session", json={"annotator_id": "a1", "token": "secret"})
        assert ok.status_code == 200


class TestAnnotationFlow:
    def test_rating_out_of_range_rejected_naming_field(self, tmp_path, small_world):
        client, _ = make_client(tmp_path, *small_world)
        session = client.post("/api/session", json={"annotator_id": "a1"}).json()
        item = client.get("/api/next", params={"session_id": session["session_id"]}).json()["item"]
        body = full_body(session["session_id"], item, item["explanations"][0]["target"])
        body["correctness"] = 6
        resp = client.post("/api/annotate", json=body)
        assert resp.status_code == 422
        assert "correctness" in resp.text

    def test_duplicate_submission_rejected(self, tmp_path, small_world):
        client, _ = make_client(tmp_path, *small_world)
        session = client.post("/api/session", json={"annotator_id": "a1"}).json()
        item = client.get("/api/next", params={"session_id": session["session_id"]}).json()["item"]
        body = full_body(session["session_id"], item, item["explanations"][0]["target"])
        assert client.post("/api/annotate", json=body).status_code == 200
        assert client.post("/api/annotate", json=body).status_code == 409

    def test_foreign_target_rejected(self, tmp_path, small_world):
        client, _ = make_client(tmp_path, *small_world)
        session = client.post("/api/session", json={"annotator_id": "a1"}).json()
        item = client.get("/api/next", params={"session_id": session["session_id"]}).json()["item"]
        body = full_body(session["session_id"], item, "ghost@model")
        assert client.post("/api/annotate", json=body).status_code == 422

    def test_queue_advances_to_done(self, tmp_path, small_world):
        client, items = make_client(tmp_path, *small_world)
        session = client.post("/api/session", json={"annotator_id": "a1"}).json()
        sid = session["session_id"]
        completed = 0
        while True:
            nxt = client.get("/api/next", params={"session_id": sid}).json()
            if nxt["done"]:
                break
            item = nxt["item"]
            for expl in item["explanations"]:
                resp = client.post(
                    "/api/annotate", json=full_body(sid, item, expl["target"])
                )
                assert resp.status_code == 200
            completed += 1
        assert completed == len(items)
        progress = client.get("/api/progress", params={"session_id": sid}).json()
        assert progress == {"completed": len(items), "total": len(items)}

    def test_annotations_resume_from_file(self, tmp_path, small_world):
        store, rules = small_world
        client, items = make_client(tmp_path, store, rules)
        session = client.post("/api/session", json={"annotator_id": "a1"}).json()
        sid = session["session_id"]
        nxt = client.get("/api/next", params={"session_id": sid}).json()["item"]
        for expl in nxt["explanations"]:
            client.post("/api/annotate", json=full_body(sid, nxt, expl["target"]))
        # rebuild the app over the same annotations file
        records = explanations_for(store, rules, PHASE2_TARGETS)
        items2 = build_work_items(store, rules, records, 2, TypeCatalog({}), seed=3)
        app2 = build_app(items2, tmp_path / "annotations.jsonl")
        client2 = TestClient(app2)
        s2 = client2.post("/api/session", json={"annotator_id": "a1"}).json()
        progress = client2.get(
            "/api/progress", params={"session_id": s2["session_id"]}
        ).json()
        assert progress["completed"] == 1


class TestPhase1Flow:
    def test_preference_required(self, tmp_path, small_world):
        store, rules = small_world
        records = []
        for rule in rules:
            rid = rule_id(rule, store)
            for strategy in ("zero_shot", "few_shot"):
                records.append(
                    ExplanationRecord(rid, strategy, "openai:m", f"{strategy} take on {rid}")
                )
        items = build_work_items(store, rules, records, 1, seed=1)
        app = build_app(items, tmp_path / "ann.jsonl")
        client = TestClient(app)
        sid = client.post("/api/session", json={"annotator_id": "a1"}).json()["session_id"]
        item = client.get("/api/next", params={"session_id": sid}).json()["item"]
        target = item["explanations"][0]["target"]
        no_pref = full_body(sid, item, target)
        resp = client.post("/api/annotate", json=no_pref)
        assert resp.status_code == 422 and "preferred" in resp.text
        with_pref = full_body(sid, item, target, preferred=target)
        assert client.post("/api/annotate", json=with_pref).status_code == 200
        # a phase-1 item completes after rating the preferred explanation
        nxt = client.get("/api/next", params={"session_id": sid}).json()
        assert nxt["done"] or nxt["item"]["item_id"] != item["item_id"]


def test_three_scripted_annotators_aggregate(tmp_path, small_world):
    """Simulated full session: the file the server writes feeds aggregation."""
    store, rules = small_world
    client, items = make_client(tmp_path, store, rules)
    planted_scores = {"a1": 5, "a2": 4, "a3": 3}
    for annotator, score in planted_scores.items():
        sid = client.post("/api/session", json={"annotator_id": annotator}).json()[
            "session_id"
        ]
        while True:
            nxt = client.get("/api/next", params={"session_id": sid}).json()
            if nxt["done"]:
                break
            item = nxt["item"]
            for expl in item["explanations"]:
                client.post(
                    "/api/annotate",
                    json=full_body(sid, item, expl["target"], correctness=score),
                )
    annotations = read_annotations(tmp_path / "annotations.jsonl")
    assert len(annotations) == len(items) * 2 * 3
    from kgrex.pipeline import compute_categories

    categories = compute_categories(store, rules)
    zero_shot = [a for a in annotations if a.target == "zero_shot@openai:m"]
    rows = {r.slice_label: r for r in aggregate_by_category(zero_shot, categories)}
    assert rows["all"].means["correctness"] == pytest.approx((5 + 4 + 3) / 3)
    assert rows["concatenated"].n == 3
