import pytest
from fastapi.testclient import TestClient

from factqa.service import create_app
from factqa.study import StudyTask, save_tasks


def _tasks():
    out = []
    for i, (method, a_side) in enumerate(
            [("ip", "left"), ("ip", "right"), ("awavg", "left"), ("lime", "right")]):
        out.append(StudyTask(
            task_id=f"t{i}", query_id=f"q{i}",
            query_text=f"query {i} _blank_", answer=f"E{i}", method=method,
            left_facts=(f"l{i}a", f"l{i}b"), right_facts=(f"r{i}a", f"r{i}b"),
            left_fact_ids=(f"fl{i}a", f"fl{i}b"),
            right_fact_ids=(f"fr{i}a", f"fr{i}b"),
            a_side=a_side))
    return out


@pytest.fixture
def client(tmp_path):
    tasks_path = tmp_path / "tasks.jsonl"
    save_tasks(_tasks(), tasks_path)
    app = create_app(tasks_path, tmp_path / "votes.jsonl", seed=5)
    return TestClient(app)


def test_health(client):
    resp = client.get("/api/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_next_task_hides_assignment(client):
    resp = client.get("/api/tasks/next", params={"annotator": "ann1"})
    assert resp.status_code == 200
    body = resp.json()
    assert "a_side" not in body
    assert len(body["left_facts"]) == 2
    assert len(body["right_facts"]) == 2
    assert body["task_id"].startswith("t")


def test_next_task_order_is_per_annotator_shuffle(client):
    first_a = client.get("/api/tasks/next", params={"annotator": "aaa"}).json()
    again = client.get("/api/tasks/next", params={"annotator": "aaa"}).json()
    assert first_a == again  # stable until a vote arrives


def test_vote_flow_and_duplicates(client):
    task = client.get("/api/tasks/next", params={"annotator": "ann1"}).json()
    resp = client.post("/api/votes", json={
        "task_id": task["task_id"], "annotator": "ann1", "choice": "difficult"})
    assert resp.status_code == 201
    dup = client.post("/api/votes", json={
        "task_id": task["task_id"], "annotator": "ann1", "choice": "difficult"})
    assert dup.status_code == 409
    # another annotator may vote the same task
    other = client.post("/api/votes", json={
        "task_id": task["task_id"], "annotator": "ann2", "choice": "rather-left"})
    assert other.status_code == 201
    # the first annotator is served a different task next
    nxt = client.get("/api/tasks/next", params={"annotator": "ann1"}).json()
    assert nxt["task_id"] != task["task_id"]


def test_vote_unknown_task(client):
    resp = client.post("/api/votes", json={
        "task_id": "zzz", "annotator": "a", "choice": "difficult"})
    assert resp.status_code == 404


def test_vote_invalid_choice(client):
    resp = client.post("/api/votes", json={
        "task_id": "t0", "annotator": "a", "choice": "meh"})
    assert resp.status_code == 422


def test_exhaustion_returns_204(client):
    for _ in range(4):
        task = client.get("/api/tasks/next", params={"annotator": "busy"}).json()
        assert client.post("/api/votes", json={
            "task_id": task["task_id"], "annotator": "busy",
            "choice": "rather-right"}).status_code == 201
    resp = client.get("/api/tasks/next", params={"annotator": "busy"})
    assert resp.status_code == 204


def test_report_reflects_votes(client):
    client.post("/api/votes", json={
        "task_id": "t0", "annotator": "a", "choice": "definitely-left"})
    client.post("/api/votes", json={
        "task_id": "t1", "annotator": "a", "choice": "definitely-left"})
    report = client.get("/api/report").json()
    ip = report["methods"]["ip"]
    assert ip["vote_count"] == 2
    # t0 has A left, t1 has A right: one definitely-a, one definitely-b
    assert ip["counts"]["definitely-a"] == 1
    assert ip["counts"]["definitely-b"] == 1
    assert ip["aggregate_score"] == pytest.approx(0.5)


def test_votes_persist_across_restart(tmp_path):
    tasks_path = tmp_path / "tasks.jsonl"
    votes_path = tmp_path / "votes.jsonl"
    save_tasks(_tasks(), tasks_path)
    with TestClient(create_app(tasks_path, votes_path, seed=5)) as client:
        client.post("/api/votes", json={
            "task_id": "t0", "annotator": "a", "choice": "difficult"})
    with TestClient(create_app(tasks_path, votes_path, seed=5)) as client2:
        dup = client2.post("/api/votes", json={
            "task_id": "t0", "annotator": "a", "choice": "difficult"})
        assert dup.status_code == 409
        report = client2.get("/api/report").json()
        assert report["total_votes"] == 1
