from __future__ import annotations

import socket
import threading
import time
from pathlib import Path

import pytest
from click.testing import CliRunner

from quakedrill.cli import main

ACH = Path(__file__).resolve().parents[1] / "src" / "quakedrill" / "scenarios" / "ach.drill"

BROKEN_DRILL = """
scenario "Broken"
behavior duck indoor_earthquake "Duck"
waypoint room at (0, 0, 0)
start start
node start at room {
  prompt "p"
  option go "Go" recommended behavior duck rationale "r" goto nowhere
}
"""


@pytest.fixture
def runner():
    return CliRunner()


def test_validate_ach_ok(runner):
    result = runner.invoke(main, ["validate", str(ACH)])
    assert result.exit_code == 0, result.output
    assert "ok" in result.output
    assert "behaviors: 13" in result.output


def test_validate_dangling_node_exits_1(runner, tmp_path):
    bad = tmp_path / "bad.drill"
    bad.write_text(BROKEN_DRILL, encoding="utf-8")
    result = runner.invoke(main, ["validate", str(bad)])
    assert result.exit_code == 1
    assert "dangling_next_node" in result.output


def test_validate_parse_error_exits_1_with_location(runner, tmp_path):
    bad = tmp_path / "bad.drill"
    bad.write_text('scenario "x"\nblarg', encoding="utf-8")
    result = runner.invoke(main, ["validate", str(bad)])
    assert result.exit_code == 1
    assert "2:1" in result.output


def test_validate_missing_file_exits_2(runner, tmp_path):
    result = runner.invoke(main, ["validate", str(tmp_path / "ghost.drill")])
    assert result.exit_code == 2


def test_run_optimal_reports_13_performed(runner, tmp_path):
    result = runner.invoke(main, [
        "--data-dir", str(tmp_path), "run", str(ACH), "--agent", "optimal"])
    assert result.exit_code == 0, result.output
    assert "performed=13" in result.output
    assert (tmp_path / "ach-optimal.log").exists()
    assert (tmp_path / "ach-optimal.report.json").exists()


def test_run_worst_declines_everything(runner, tmp_path):
    result = runner.invoke(main, [
        "--data-dir", str(tmp_path), "run", str(ACH), "--agent", "worst"])
    assert result.exit_code == 0
    assert "performed=0" in result.output and "declined=13" in result.output


def test_run_random_is_deterministic_per_seed(runner, tmp_path):
    for directory in ("a", "b"):
        result = runner.invoke(main, [
            "--data-dir", str(tmp_path / directory), "--seed", "42",
            "run", str(ACH), "--agent", "random", "--stall", "0.5"])
        assert result.exit_code == 0, result.output
    log_a = (tmp_path / "a" / "ach-random.log").read_bytes()
    log_b = (tmp_path / "b" / "ach-random.log").read_bytes()
    assert log_a == log_b
    other = runner.invoke(main, [
        "--data-dir", str(tmp_path / "c"), "--seed", "43",
        "run", str(ACH), "--agent", "random", "--stall", "0.5"])
    assert other.exit_code == 0
    assert (tmp_path / "c" / "ach-random.log").read_bytes() != log_a


def test_run_script_agent(runner, tmp_path):
    script = tmp_path / "walk.txt"
    script.write_text(
        "cover_under_table watch_surroundings stay_under_cover collect_belongings\n"
        "take_first_aid_kit help_victims search_alternative_exit extinguish_or_report\n"
        "unplug_printer listen_radio use_staircase go_to_assembly_point stay_at_assembly\n",
        encoding="utf-8")
    result = runner.invoke(main, [
        "--data-dir", str(tmp_path), "run", str(ACH),
        "--agent", "script", "--script-file", str(script)])
    assert result.exit_code == 0, result.output
    assert "performed=13" in result.output


def test_run_script_invalid_step_names_it(runner, tmp_path):
    script = tmp_path / "walk.txt"
    script.write_text("cover_under_table definitely_wrong\n", encoding="utf-8")
    result = runner.invoke(main, [
        "--data-dir", str(tmp_path), "run", str(ACH),
        "--agent", "script", "--script-file", str(script)])
    assert result.exit_code == 1
    assert "step 2" in result.output and "definitely_wrong" in result.output


def test_simulate_cohort_counts_and_reproducibility(runner, tmp_path):
    args = ["--data-dir", str(tmp_path), "--seed", "7", "simulate-cohort",
            "--staff", "25", "--visitors", "62"]
    assert runner.invoke(main, args + ["--out", str(tmp_path / "one.csv")]).exit_code == 0
    assert runner.invoke(main, args + ["--out", str(tmp_path / "two.csv")]).exit_code == 0
    one = (tmp_path / "one.csv").read_text(encoding="utf-8")
    assert one == (tmp_path / "two.csv").read_text(encoding="utf-8")
    staff_ids = {line.split(",")[0] for line in one.splitlines()[1:]
                 if line.startswith("staff-")}
    visitor_ids = {line.split(",")[0] for line in one.splitlines()[1:]
                   if line.startswith("visitor-")}
    assert len(staff_ids) == 25 and len(visitor_ids) == 62


def test_simulate_cohort_rejects_empty(runner, tmp_path):
    result = runner.invoke(main, [
        "--data-dir", str(tmp_path), "simulate-cohort",
        "--staff", "0", "--visitors", "0"])
    assert result.exit_code == 1


def test_analyze_renders_rows(runner, tmp_path):
    csv = tmp_path / "cohort.csv"
    assert runner.invoke(main, [
        "--seed", "0", "simulate-cohort", "--staff", "10", "--visitors", "12",
        "--out", str(csv)]).exit_code == 0
    result = runner.invoke(main, ["analyze", str(csv)])
    assert result.exit_code == 0, result.output
    for measure in ("during_indoor", "after_indoor", "after_outdoor", "self_efficacy"):
        assert result.output.count(measure) == 3
    assert "Z = " in result.output and "p = " in result.output

    as_json = runner.invoke(main, ["analyze", str(csv), "--json"])
    assert as_json.exit_code == 0
    assert '"rows"' in as_json.output


def test_analyze_malformed_rows_listed(runner, tmp_path):
    csv = tmp_path / "bad.csv"
    csv.write_text("participant,group,measure,pre,post\n"
                   "p1,staff,m,1.0,2.0\n"
                   "p2,staff,m,1.0,\n", encoding="utf-8")
    result = runner.invoke(main, ["analyze", str(csv)])
    assert result.exit_code == 1
    assert "row 3" in result.output and "p2" in result.output


def test_analyze_missing_file_exits_2(runner, tmp_path):
    assert runner.invoke(main, ["analyze", str(tmp_path / "ghost.csv")]).exit_code == 2


def test_serve_bad_scenario_dir_exits_2(runner, tmp_path):
    result = runner.invoke(main, [
        "--data-dir", str(tmp_path / "data"), "serve",
        "--scenario-dir", str(tmp_path / "missing")])
    assert result.exit_code == 2


def test_serve_busy_port_exits_2(runner, tmp_path):
    blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    try:
        result = runner.invoke(main, [
            "--data-dir", str(tmp_path / "data"), "serve", "--port", str(port)])
        assert result.exit_code == 2
        assert "cannot listen" in result.output
    finally:
        blocker.close()


def test_served_http_session_end_to_end(tmp_path):
    """Boot the real server and complete a whole drill over HTTP."""
    import httpx
    import uvicorn

    from quakedrill.service import create_app

    app = create_app(ACH.parent, tmp_path / "data", sweep_interval=0.05)
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = time.time() + 10
        while not server.started:
            assert time.time() < deadline, "server did not start"
            time.sleep(0.01)
        port = server.servers[0].sockets[0].getsockname()[1]
        base = f"http://127.0.0.1:{port}"

        with httpx.Client(base_url=base, timeout=5.0) as http:
            pid = http.post("/participants", json={"group": "staff"}).json()["id"]
            sid = http.post("/sessions", json={
                "scenario_id": "ACH Evacuation Drill",
                "participant_id": pid}).json()["session_id"]
            scenario = app.state.store.scenarios["ACH Evacuation Drill"]
            state = http.get(f"/sessions/{sid}/state").json()
            while not state["finished"]:
                node = scenario.node(state["node_id"])
                pick = next(o for o in node.options if o.recommended)
                reply = http.post(f"/sessions/{sid}/choice",
                                  json={"option_id": pick.id})
                assert reply.status_code == 200
                assert reply.json()["color"] == "green"
                state = reply.json()["state"]
            report = http.get(f"/sessions/{sid}/assessment").json()
            assert report["score_summary"]["performed"] == 13
    finally:
        server.should_exit = True
        thread.join(timeout=10)
