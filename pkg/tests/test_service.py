from __future__ import annotations

from pathlib import Path
import shutil

import pytest
from fastapi.testclient import TestClient

from quakedrill.runtime import parse_log, replay, timeout_remaining_ms
from quakedrill.service import Store, create_app

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "quakedrill" / "scenarios"


class FakeClock:
    def __init__(self):
        self.now = 1000.0

    def __call__(self):
        return self.now

    def tick(self, seconds):
        self.now += seconds


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def client(tmp_path, clock):
    app = create_app(SCENARIOS, tmp_path / "data", clock=clock)
    with TestClient(app) as c:
        c.app = app
        yield c


def make_participant(client, group="visitor", pid=None):
    body = {"group": group}
    if pid:
        body["id"] = pid
    response = client.post("/participants", json=body)
    assert response.status_code == 201, response.text
    return response.json()["id"]


def open_session(client, pid):
    response = client.post("/sessions", json={
        "scenario_id": "ACH Evacuation Drill", "participant_id": pid})
    assert response.status_code == 201, response.text
    return response.json()["session_id"]


def play_optimally(client, session_id):
    colors = []
    state = client.get(f"/sessions/{session_id}/state").json()
    while not state["finished"]:
        # recommended options are not flagged in the payload by design;
        # walk the node's authored options via the scenario
        store = client.app.state.store
        scenario = store.scenarios["ACH Evacuation Drill"]
        node = scenario.node(state["node_id"])
        pick = next(o for o in node.options if o.recommended)
        response = client.post(f"/sessions/{session_id}/choice",
                               json={"option_id": pick.id})
        assert response.status_code == 200, response.text
        payload = response.json()
        colors.append(payload["color"])
        state = payload["state"]
    return colors, state


def test_full_session_flow(client):
    pid = make_participant(client)
    sid = open_session(client, pid)

    state = client.get(f"/sessions/{sid}/state").json()
    assert "outside Auckland City Hospital" in state["prompt"]
    assert [o["id"] for o in state["options"]][:1] == ["cover_under_table"]
    assert set(state["options"][0]) == {"id", "label"}  # no recommended leak
    assert state["timeout_remaining_ms"] == 10_000

    colors, final = play_optimally(client, sid)
    assert colors == ["green"] * 13
    assert final["finished"] and final["assessment"].endswith("/assessment")

    report = client.get(f"/sessions/{sid}/assessment").json()
    assert report["session_id"] == sid
    assert report["score_summary"]["performed"] == 13


def test_state_view_not_found_and_conflicts(client):
    pid = make_participant(client)
    sid = open_session(client, pid)

    assert client.get("/sessions/nope/state").status_code == 404
    assert client.get("/sessions/nope/state").json()["error"]["code"] == "unknown_session"

    early = client.get(f"/sessions/{sid}/assessment")
    assert early.status_code == 409
    assert early.json()["error"]["code"] == "session_active"

    stale = client.post(f"/sessions/{sid}/choice", json={"option_id": "use_staircase"})
    assert stale.status_code == 409
    assert stale.json()["error"]["code"] == "stale_option"

    _, final = play_optimally(client, sid)
    done = client.post(f"/sessions/{sid}/choice", json={"option_id": "cover_under_table"})
    assert done.status_code == 409
    assert done.json()["error"]["code"] == "session_finished"


def test_create_session_requires_known_ids(client):
    pid = make_participant(client)
    missing = client.post("/sessions", json={
        "scenario_id": "nope", "participant_id": pid})
    assert missing.status_code == 404
    missing = client.post("/sessions", json={
        "scenario_id": "ACH Evacuation Drill", "participant_id": "ghost"})
    assert missing.status_code == 404


def test_multiple_sessions_per_participant(client):
    pid = make_participant(client)
    first, second = open_session(client, pid), open_session(client, pid)
    assert first != second


def test_duplicate_participant_conflict(client):
    make_participant(client, pid="p1")
    dup = client.post("/participants", json={"id": "p1", "group": "staff"})
    assert dup.status_code == 409


def test_participant_group_validated(client):
    bad = client.post("/participants", json={"group": "wizard"})
    assert bad.status_code == 422


def test_clock_drives_timeout_countdown(client, clock):
    pid = make_participant(client)
    sid = open_session(client, pid)
    clock.tick(4.0)
    fired = client.app.state.store.sweep_once()
    assert fired == 0
    state = client.get(f"/sessions/{sid}/state").json()
    assert state["elapsed_ms"] == 4_000
    assert state["timeout_remaining_ms"] == 6_000


def test_sweep_fires_due_timeout(client, clock):
    pid = make_participant(client)
    sid = open_session(client, pid)
    clock.tick(12.5)
    assert client.app.state.store.sweep_once() == 1
    state = client.get(f"/sessions/{sid}/state").json()
    assert state["node_id"] == "falling_hazards"


def test_choice_after_deadline_conflicts_or_times_out(client, clock):
    pid = make_participant(client)
    sid = open_session(client, pid)
    clock.tick(11.0)
    # timeout fires during the command's clock sync; the cover-node option
    # is stale by the time the choice applies
    response = client.post(f"/sessions/{sid}/choice",
                           json={"option_id": "cover_under_table"})
    assert response.status_code == 409
    log_text = (client.app.state.store.sessions[sid].log_path).read_text()
    assert "timeout_fired" in log_text


def test_questionnaire_validation(client):
    pid = make_participant(client)
    url = f"/participants/{pid}/questionnaire"

    ok = client.post(url, json={"phase": "pre", "battery": "self_efficacy",
                                "values": [3, 3, 3, 3, 3, 3]})
    assert ok.status_code == 201

    out_of_range = client.post(url, json={"phase": "pre", "battery": "self_efficacy",
                                          "values": [4, 0, 0, 0, 0, 0]})
    assert out_of_range.status_code == 422

    wrong_count = client.post(url, json={"phase": "pre", "battery": "self_efficacy",
                                         "values": [1, 2, 3]})
    assert wrong_count.status_code == 422

    engagement_pre = client.post(url, json={"phase": "pre", "battery": "engagement",
                                            "values": [2]})
    assert engagement_pre.status_code == 422

    engagement_post = client.post(url, json={"phase": "post", "battery": "engagement",
                                             "values": [2]})
    assert engagement_post.status_code == 201

    unknown = client.post(url, json={"phase": "post", "battery": "vibes", "values": [1]})
    assert unknown.status_code == 422

    missing = client.post("/participants/ghost/questionnaire",
                          json={"phase": "pre", "battery": "self_efficacy",
                                "values": [0, 0, 0, 0, 0, 0]})
    assert missing.status_code == 404


def test_questionnaire_resubmission_replaces(client, tmp_path):
    pid = make_participant(client)
    url = f"/participants/{pid}/questionnaire"
    client.post(url, json={"phase": "pre", "battery": "self_efficacy",
                           "values": [0, 0, 0, 0, 0, 0]})
    client.post(url, json={"phase": "pre", "battery": "self_efficacy",
                           "values": [1, 1, 1, 1, 1, 1]})
    store = client.app.state.store
    assert store.questionnaires[(pid, "pre", "self_efficacy")] == [1, 1, 1, 1, 1, 1]
    assert len([k for k in store.questionnaires if k[0] == pid]) == 1


def test_knowledge_checklist_endpoint(client):
    pid = make_participant(client)
    url = f"/participants/{pid}/knowledge"
    ok = client.post(url, json={"phase": "pre", "aspect": "during_indoor",
                                "coder_id": 1, "items": ["dch_under_table"]})
    assert ok.status_code == 201
    bad_item = client.post(url, json={"phase": "pre", "aspect": "during_indoor",
                                      "coder_id": 1, "items": ["bring_snacks"]})
    assert bad_item.status_code == 422
    bad_coder = client.post(url, json={"phase": "pre", "aspect": "during_indoor",
                                       "coder_id": 9, "items": []})
    assert bad_coder.status_code == 422
    bad_aspect = client.post(url, json={"phase": "pre", "aspect": "cooking",
                                        "coder_id": 1, "items": []})
    assert bad_aspect.status_code == 422


def _seed_analysis_data(client, n=6):
    import random

    from quakedrill.assessment import AFTER_INDOOR_ITEMS

    rng = random.Random(0)
    for i in range(n):
        pid = make_participant(client, group="staff" if i % 2 else "visitor",
                               pid=f"p{i}")
        for phase, items in [("pre", ["dch_under_table"]),
                             ("post", ["dch_under_table", "attention_falling"])]:
            for coder in (1, 2, 3):
                client.post(f"/participants/{pid}/knowledge", json={
                    "phase": phase, "aspect": "during_indoor",
                    "coder_id": coder, "items": items})
            for coder in (1, 2, 3):
                client.post(f"/participants/{pid}/knowledge", json={
                    "phase": phase, "aspect": "after_outdoor",
                    "coder_id": coder,
                    "items": ["open_space_away"] if phase == "post" else []})
            for coder in (1, 2, 3):
                count = 2 if phase == "pre" else 5 + (i % 3)
                client.post(f"/participants/{pid}/knowledge", json={
                    "phase": phase, "aspect": "after_indoor",
                    "coder_id": coder, "items": list(AFTER_INDOOR_ITEMS[:count])})
        low = [rng.randint(-3, 0) for _ in range(6)]
        high = [rng.randint(1, 3) for _ in range(6)]
        client.post(f"/participants/{pid}/questionnaire", json={
            "phase": "pre", "battery": "self_efficacy", "values": low})
        client.post(f"/participants/{pid}/questionnaire", json={
            "phase": "post", "battery": "self_efficacy", "values": high})


def test_cohort_endpoint(client):
    empty = client.get("/analysis/cohort")
    assert empty.status_code == 409
    assert empty.json()["error"]["code"] == "no_paired_data"

    _seed_analysis_data(client)
    payload = client.get("/analysis/cohort").json()
    measures = {row["measure"] for row in payload["rows"]}
    assert measures == {"during_indoor", "after_indoor", "after_outdoor",
                        "self_efficacy"}
    during = [r for r in payload["rows"] if r["measure"] == "during_indoor"]
    assert [r["group"] for r in during] == ["staff", "visitor", "all"]
    all_row = next(r for r in during if r["group"] == "all")
    assert all_row["pre"]["mean"] == 3.0 and all_row["post"]["mean"] == 4.0

    staff_only = client.get("/analysis/cohort", params={"group": "staff"}).json()
    assert {r["group"] for r in staff_only["rows"]} == {"staff", "all"}

    one_measure = client.get("/analysis/cohort",
                             params={"measure": "self_efficacy"}).json()
    assert {r["measure"] for r in one_measure["rows"]} == {"self_efficacy"}

    bad = client.get("/analysis/cohort", params={"group": "wizard"})
    assert bad.status_code == 422


def test_durability_restart_equals_replay(tmp_path, clock):
    data_dir = tmp_path / "data"
    app = create_app(SCENARIOS, data_dir, clock=clock)
    with TestClient(app) as client:
        client.app = app
        pid = make_participant(client, pid="p1")
        sid = open_session(client, pid)
        for option in ("cover_under_table", "watch_surroundings", "rush_out_immediately"):
            clock.tick(1.5)
            response = client.post(f"/sessions/{sid}/choice", json={"option_id": option})
            assert response.status_code == 200
        before = client.get(f"/sessions/{sid}/state").json()

    # simulate a crash-and-restart: a brand-new store over the same files
    restarted = create_app(SCENARIOS, data_dir, clock=clock)
    with TestClient(restarted) as client2:
        after = client2.get(f"/sessions/{sid}/state").json()
    assert after == before

    store = restarted.state.store
    scenario = store.scenarios["ACH Evacuation Drill"]
    log = parse_log((data_dir / "sessions" / f"{sid}.log").read_text(encoding="utf-8"))
    state = replay(log, scenario)
    assert after["node_id"] == state.current_node
    assert after["elapsed_ms"] == state.elapsed_ms
    assert after["timeout_remaining_ms"] == timeout_remaining_ms(scenario, state)


def test_sessions_do_not_interfere(client, clock):
    pid_a = make_participant(client, pid="alice")
    pid_b = make_participant(client, pid="bob")
    sid_a, sid_b = open_session(client, pid_a), open_session(client, pid_b)

    green = client.post(f"/sessions/{sid_a}/choice",
                        json={"option_id": "cover_under_table"})
    assert green.json()["color"] == "green"
    clock.tick(0.5)
    red = client.post(f"/sessions/{sid_b}/choice",
                      json={"option_id": "crouch_beside_window"})
    assert red.json()["color"] == "red"
    client.post(f"/sessions/{sid_a}/choice", json={"option_id": "watch_surroundings"})

    store = client.app.state.store
    log_a = parse_log(store.sessions[sid_a].log_path.read_text(encoding="utf-8"))
    log_b = parse_log(store.sessions[sid_b].log_path.read_text(encoding="utf-8"))
    assert {ev.option_id for ev in log_a if ev.kind == "choice"} == {
        "cover_under_table", "watch_surroundings"}
    assert {ev.option_id for ev in log_b if ev.kind == "choice"} == {
        "crouch_beside_window"}


def test_bad_scenario_dir_rejected(tmp_path):
    with pytest.raises(FileNotFoundError):
        Store(tmp_path / "missing", tmp_path / "data")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(ValueError, match="no .drill"):
        Store(empty, tmp_path / "data")


def test_broken_scenario_file_rejected(tmp_path):
    scen_dir = tmp_path / "scen"
    scen_dir.mkdir()
    shutil.copy(SCENARIOS / "ach.drill", scen_dir / "ok.drill")
    (scen_dir / "broken.drill").write_text("scenario oops", encoding="utf-8")
    with pytest.raises(ValueError, match="broken.drill"):
        Store(scen_dir, tmp_path / "data")
