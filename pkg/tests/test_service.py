import json

import pytest
from fastapi.testclient import TestClient

from opinionlab.corpus import EmbeddingStore, make_tweet
from opinionlab.reasons import DEFAULT_EMBED_DIM, final_catalog, initial_catalog
from opinionlab.service import (
    assignments_payload,
    closest_payload,
    create_app,
    log_payload,
    projection_payload,
    reasons_payload,
    silhouette_payload,
    wordcloud_payload,
)

TEXTS = (
    "the government cannot be trusted with our health",
    "vaccines are not safe they skipped the animal trials",
    "i got my shot to protect my grandmother",
    "big pharma only wants the money not our wellbeing",
    "natural immunity is enough for healthy people",
    "the science is solid and the trials were thorough",
    "mandates take away my freedom of choice",
    "covid is not even real wake up people",
)


def fresh_app(data_dir=None, corpus=None):
    corpus = corpus or [make_tweet(f"t{i}", text) for i, text in enumerate(TEXTS)]
    store = EmbeddingStore(DEFAULT_EMBED_DIM)
    return create_app(corpus, final_catalog(store), store, data_dir=data_dir)


def body_of(payload) -> bytes:
    return json.dumps(payload, ensure_ascii=False).encode("utf-8")


def session_of(client: TestClient):
    return client.app.state.workbench.session


def test_get_reasons_full_catalog():
    client = TestClient(fresh_app())
    resp = client.get("/reasons")
    assert resp.status_code == 200
    reasons = resp.json()
    assert len(reasons) == 22
    sides = [r["stance_side"] for r in reasons]
    assert sides.count("Anti") == 13
    assert sides.count("Pro") == 9
    assert resp.content == body_of(reasons_payload(session_of(client)))


def test_initial_catalog_is_anti_only():
    store = EmbeddingStore(DEFAULT_EMBED_DIM)
    corpus = [make_tweet("t0", TEXTS[0])]
    client = TestClient(create_app(corpus, initial_catalog(store), store))
    reasons = client.get("/reasons").json()
    assert {r["stance_side"] for r in reasons} == {"Anti"}


def test_closest_matches_library_bytes():
    client = TestClient(fresh_app())
    session = session_of(client)
    rid = sorted(session.catalog)[0]
    resp = client.get(f"/reasons/{rid}/closest", params={"k": 5})
    assert resp.status_code == 200
    assert resp.content == body_of(closest_payload(session, rid, 5))
    assert len(resp.json()) == 5
    sims = [s for _tid, s in resp.json()]
    assert sims == sorted(sims, reverse=True)


def test_wordcloud_matches_library_bytes():
    client = TestClient(fresh_app())
    session = session_of(client)
    # pick a reason that actually has tweets assigned
    rid = next(a.reason_id for a in session.assignments if a.reason_id is not None)
    resp = client.get(f"/reasons/{rid}/wordcloud", params={"n": 10})
    assert resp.status_code == 200
    assert resp.content == body_of(wordcloud_payload(session, rid, 10))


def test_assignments_histogram_conserves_tweets():
    client = TestClient(fresh_app())
    resp = client.get("/assignments")
    assert resp.status_code == 200
    blob = resp.json()
    assert resp.content == body_of(assignments_payload(session_of(client)))
    assert len(blob["assignments"]) == len(TEXTS)
    assert sum(blob["histogram"].values()) + blob["unassigned"] == len(TEXTS)


def test_assignments_threshold_moves_tweets_out():
    client = TestClient(fresh_app())
    all_in = client.get("/assignments").json()
    strict = client.get("/assignments", params={"threshold": 0.99}).json()
    assert strict["unassigned"] >= all_in["unassigned"]
    assert sum(strict["histogram"].values()) <= sum(all_in["histogram"].values())


def test_projection_and_silhouette_match_library():
    client = TestClient(fresh_app())
    session = session_of(client)
    proj = client.get("/projection")
    assert proj.status_code == 200
    assert proj.content == body_of(projection_payload(session))
    assert len(proj.json()) == len(TEXTS)
    sil = client.get("/silhouette")
    assert sil.status_code == 200
    assert sil.content == body_of(silhouette_payload(session))
    assert -1.0 <= sil.json()["silhouette"] <= 1.0


def test_post_then_delete_restores_assignments():
    client = TestClient(fresh_app())
    before = client.get("/assignments").content
    assert client.post("/reasons", json={
        "id": "TestReason", "phrase": "totally new argument here"}).status_code == 200
    during = client.get("/assignments").content
    assert during != before or json.loads(during) == json.loads(before)
    assert client.delete("/reasons/TestReason").status_code == 200
    assert client.get("/assignments").content == before


def test_mutation_error_codes():
    client = TestClient(fresh_app())
    ok = client.post("/reasons", json={"id": "Dup", "phrase": "something"})
    assert ok.status_code == 200
    assert client.post("/reasons", json={"id": "Dup", "phrase": "x"}).status_code == 409
    assert client.delete("/reasons/NoSuch").status_code == 404
    assert client.post("/reasons/NoSuch/phrases", json={"phrase": "x"}).status_code == 404
    assert client.post("/reasons", json={"id": "Blank", "phrase": "   "}).status_code == 400
    assert client.post("/reasons", json={
        "id": "BadSide", "phrase": "x", "stance_side": "Sideways"}).status_code == 400


def test_query_validation_maps_to_400():
    client = TestClient(fresh_app())
    rid = sorted(session_of(client).catalog)[0]
    assert client.get(f"/reasons/{rid}/closest", params={"k": 0}).status_code == 400
    assert client.get(f"/reasons/{rid}/closest", params={"k": "many"}).status_code == 400
    assert client.get("/reasons/NoSuch/closest").status_code == 404


def test_undo_rolls_back_last_edit():
    client = TestClient(fresh_app())
    before = client.get("/reasons").content
    client.post("/reasons", json={"id": "Ephemeral", "phrase": "soon gone"})
    assert client.get("/reasons").content != before
    assert client.post("/session/undo").status_code == 200
    assert client.get("/reasons").content == before


def test_undo_with_empty_log_is_400():
    client = TestClient(fresh_app())
    assert client.post("/session/undo").status_code == 400


def test_session_log_orders_every_event():
    client = TestClient(fresh_app())
    client.post("/reasons", json={"id": "One", "phrase": "first"})
    client.post("/reasons/One/phrases", json={"phrase": "second phrase"})
    client.post("/session/undo")
    resp = client.get("/session/log")
    assert resp.status_code == 200
    log = resp.json()
    assert [ev["action"] for ev in log] == ["add_reason", "add_phrase", "undo"]
    assert [ev["seq"] for ev in log] == [0, 1, 2]
    assert resp.content == body_of(log_payload(session_of(client)))


def test_crash_recovery_replays_log(tmp_path):
    corpus = [make_tweet(f"t{i}", text) for i, text in enumerate(TEXTS)]
    client = TestClient(fresh_app(data_dir=tmp_path, corpus=corpus))
    client.post("/reasons", json={"id": "Sticky", "phrase": "kept across restarts"})
    client.post("/reasons/Sticky/phrases", json={"phrase": "another phrase"})
    assert client.delete("/reasons/VaxDoesntWork").status_code == 200
    reasons = client.get("/reasons").content
    assignments = client.get("/assignments").content
    log = client.get("/session/log").content

    reborn = TestClient(fresh_app(data_dir=tmp_path, corpus=corpus))
    assert reborn.get("/reasons").content == reasons
    assert reborn.get("/assignments").content == assignments
    assert reborn.get("/session/log").content == log


def test_persistence_file_written_after_each_mutation(tmp_path):
    client = TestClient(fresh_app(data_dir=tmp_path))
    path = tmp_path / "session.jsonl"
    client.post("/reasons", json={"id": "A1", "phrase": "one"})
    assert len(path.read_text().splitlines()) == 1
    client.post("/reasons/A1/phrases", json={"phrase": "two"})
    assert len(path.read_text().splitlines()) == 2
    # a failed mutation must not append
    client.post("/reasons", json={"id": "A1", "phrase": "dup"})
    assert len(path.read_text().splitlines()) == 2
