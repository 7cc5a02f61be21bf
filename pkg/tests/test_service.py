import pytest
from fastapi.testclient import TestClient

from agavescan.devserver import seed_store
from agavescan.segmenter import SegmenterConfig
from agavescan.service import create_app


@pytest.fixture
def client(tmp_path):
    store = seed_store(tmp_path / "store")
    app = create_app(store, SegmenterConfig())
    with TestClient(app) as c:
        yield c


def _proposals(client, session_id, **params):
    r = client.get(f"/sessions/{session_id}/proposals", params=params)
    assert r.status_code == 200
    return r.json()


def open_session(client):
    r = client.post("/sessions", json={"phase": 2, "cell_ids": ["synth"]})
    assert r.status_code == 200
    return r.json()["session_id"]


def test_session_and_listing(client):
    sid = open_session(client)
    body = _proposals(client, sid)
    assert body["total"] == 3
    item = body["proposals"][0]
    assert item["proposal_id"] == "demo_prop_0"
    assert item["polygon"]["type"] == "Polygon"
    assert item["clip_url"].endswith(".png")
    assert item["transform"]["pixel_size_x"] == 0.5
    # the clip and mask referenced by the listing are servable
    assert client.get(item["clip_url"]).status_code == 200
    assert client.get(item["mask_url"]).status_code == 200
    tr = client.get(f"/clips/{item['clip_id']}/transform.json")
    assert tr.status_code == 200 and tr.json() == item["transform"]


def test_pagination(client):
    sid = open_session(client)
    page1 = _proposals(client, sid, page=1, page_size=2)
    page2 = _proposals(client, sid, page=2, page_size=2)
    assert len(page1["proposals"]) == 2 and len(page2["proposals"]) == 1
    ids = [p["proposal_id"] for p in page1["proposals"] + page2["proposals"]]
    assert ids == ["demo_prop_0", "demo_prop_1", "demo_prop_2"]


def test_progress_endpoint(client):
    sid = open_session(client)
    r = client.get(f"/sessions/{sid}/progress")
    assert r.json() == {"pending": 3, "decided": 0, "total": 3}
    client.post("/proposals/demo_prop_0/decision",
                json={"action": "reject", "reviewer": "ana"})
    assert client.get(f"/sessions/{sid}/progress").json()["decided"] == 1


def test_decision_approve_and_conflict(client):
    r = client.post("/proposals/demo_prop_0/decision",
                    json={"action": "approve", "reviewer": "ana"})
    assert r.status_code == 200
    assert r.json()["status"] == "approved"
    # the race loser gets a 409
    r = client.post("/proposals/demo_prop_0/decision",
                    json={"action": "reject", "reviewer": "ben"})
    assert r.status_code == 409


def test_decision_edit_with_polygon(client):
    sid = open_session(client)
    poly = _proposals(client, sid)["proposals"][1]["polygon"]["coordinates"]
    # nudge one vertex by a pixel
    poly[0][1] = [poly[0][1][0] + 0.5, poly[0][1][1]]
    r = client.post("/proposals/demo_prop_1/decision",
                    json={"action": "edit", "reviewer": "ana", "polygon": poly})
    assert r.status_code == 200 and r.json()["status"] == "edited"


def test_decision_rejects_bad_polygon(client):
    bowtie = [[[0, 0], [2, 2], [2, 0], [0, 2], [0, 0]]]
    r = client.post("/proposals/demo_prop_1/decision",
                    json={"action": "edit", "reviewer": "ana",
                          "polygon": bowtie})
    assert r.status_code == 422
    r = client.post("/proposals/demo_prop_1/decision",
                    json={"action": "banish", "reviewer": "ana"})
    assert r.status_code == 422


def test_not_found_routes(client):
    assert client.get("/sessions/nope/progress").status_code == 404
    assert client.get("/clips/nope.png").status_code == 404
    assert client.get("/clips/nope/mask.png").status_code == 404
    assert client.get("/phases/3/report").status_code == 404
    assert client.post("/proposals/nope/decision",
                       json={"action": "approve",
                             "reviewer": "x"}).status_code == 404


def test_promote_blocks_then_succeeds(client):
    r = client.post("/phases/1/promote", json={})
    assert r.status_code == 409  # three pending proposals
    for pid, action in [("demo_prop_0", "approve"), ("demo_prop_1", "approve"),
                        ("demo_prop_2", "reject")]:
        client.post(f"/proposals/{pid}/decision",
                    json={"action": action, "reviewer": "ana"})
    r = client.post("/phases/1/promote", json={})
    assert r.status_code == 200
    report = r.json()
    assert report["phase"] == 2
    assert report["labels"] == 3  # one expert label plus two approvals
    assert client.get("/phases/2/report").json() == report


def test_report_phase1(client):
    r = client.get("/phases/1/report")
    assert r.status_code == 200
    body = r.json()
    assert body["phase"] == 1 and body["total"] == 2
    assert body["counts"]["train"] == 1
