"""HTTP facade and persistence for live drill sessions.

The service owns the only wall clock in the system. Each session command
converts real elapsed time into an ``advance_time`` call on the
deterministic core before applying the command, and every event is
written to the session's append-only log file before the response goes
out. Restarting the service therefore loses nothing: session state is
rebuilt by replaying the persisted logs.

Storage is file-based under one data directory:

    participants.json, questionnaires.json, knowledge.json
    sessions/index.json
    sessions/<session-id>.log     (runtime event-log format)
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import os
from pathlib import Path
import threading
import time
import uuid

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .assessment import (
    KnowledgeAspect,
    KnowledgeResponse,
    build_report,
    merge_coders,
    report_to_dict,
    score_knowledge,
)
from .cohort import CohortRecord, cohort_analysis, cohort_table_to_dict
from .dsl import ParseError, parse_scenario
from .model import Scenario, validate_scenario
from .runtime import (
    SessionError,
    SessionState,
    advance_time,
    choose,
    format_event,
    parse_log,
    replay,
    start_session,
    timeout_remaining_ms,
)
from .stats import factor_scores

BATTERIES = {"self_efficacy": 6, "training_efficacy": 1, "engagement": 1}
POST_ONLY_BATTERIES = ("training_efficacy", "engagement")
KNOWLEDGE_MEASURES = tuple(a.value for a in KnowledgeAspect)
MEASURES = KNOWLEDGE_MEASURES + ("self_efficacy",)


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


def _not_found(code: str, message: str) -> ServiceError:
    return ServiceError(404, code, message)


def _conflict(code: str, message: str) -> ServiceError:
    return ServiceError(409, code, message)


def _invalid(message: str, code: str = "validation_error") -> ServiceError:
    return ServiceError(422, code, message)


@dataclass
class _LiveSession:
    session_id: str
    participant_id: str
    scenario: Scenario
    state: SessionState
    log_path: Path
    wall_anchor: float
    persisted_events: int = 0
    lock: threading.RLock = field(default_factory=threading.RLock)


def load_scenarios(scenario_dir) -> dict[str, Scenario]:
    """Parse and validate every ``*.drill`` file in a directory."""
    directory = Path(scenario_dir)
    if not directory.is_dir():
        raise FileNotFoundError(f"scenario directory {directory} does not exist")
    scenarios: dict[str, Scenario] = {}
    for path in sorted(directory.glob("*.drill")):
        try:
            scenario = parse_scenario(path.read_text(encoding="utf-8"))
        except ParseError as exc:
            raise ValueError(f"{path}: {exc}") from exc
        report = validate_scenario(scenario)
        if not report.ok:
            first = report.errors[0]
            raise ValueError(f"{path}: [{first.code}] {first.message}")
        if scenario.id in scenarios:
            raise ValueError(f"{path}: duplicate scenario id {scenario.id!r}")
        scenarios[scenario.id] = scenario
    if not scenarios:
        raise ValueError(f"no .drill scenarios found in {directory}")
    return scenarios


class Store:
    """All service state plus its on-disk mirror.

    Commands against one session are serialized by a per-session lock;
    every mutation is persisted before the calling endpoint returns.
    """

    def __init__(self, scenario_dir, data_dir, clock=time.monotonic):
        self.scenarios = load_scenarios(scenario_dir)
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self._store_lock = threading.RLock()

        self.participants: dict[str, dict] = {}
        self.questionnaires: dict[tuple[str, str, str], list[int]] = {}
        self.knowledge: dict[tuple[str, str, str, int], list[str]] = {}
        self.sessions: dict[str, _LiveSession] = {}
        self._load()

    # -- persistence ----------------------------------------------------------

    def _write_json(self, name: str, payload) -> None:
        path = self.data_dir / name
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
        os.replace(tmp, path)

    def _read_json(self, name: str, default):
        path = self.data_dir / name
        if not path.exists():
            return default
        return json.loads(path.read_text(encoding="utf-8"))

    def _save_participants(self) -> None:
        self._write_json("participants.json", list(self.participants.values()))

    def _save_questionnaires(self) -> None:
        rows = [
            {"participant_id": pid, "phase": phase, "battery": battery, "values": values}
            for (pid, phase, battery), values in sorted(self.questionnaires.items())
        ]
        self._write_json("questionnaires.json", rows)

    def _save_knowledge(self) -> None:
        rows = [
            {"participant_id": pid, "phase": phase, "aspect": aspect,
             "coder_id": coder, "items": sorted(items)}
            for (pid, phase, aspect, coder), items in sorted(self.knowledge.items())
        ]
        self._write_json("knowledge.json", rows)

    def _save_session_index(self) -> None:
        rows = [
            {
                "session_id": sess.session_id,
                "participant_id": sess.participant_id,
                "scenario_id": sess.scenario.id,
                "log_file": sess.log_path.name,
                "status": "finished" if sess.state.finished else "active",
            }
            for sess in sorted(self.sessions.values(), key=lambda s: s.session_id)
        ]
        self._write_json("sessions/index.json", rows)

    def _append_events(self, sess: _LiveSession) -> None:
        """Persist any events not yet on disk; fsync before returning."""
        pending = sess.state.log[sess.persisted_events:]
        if not pending:
            return
        with open(sess.log_path, "a", encoding="utf-8") as fh:
            for event in pending:
                fh.write(format_event(event) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        sess.persisted_events = len(sess.state.log)
        if any(ev.kind == "session_end" for ev in pending):
            self._save_session_index()

    def _load(self) -> None:
        for record in self._read_json("participants.json", []):
            self.participants[record["id"]] = record
        for row in self._read_json("questionnaires.json", []):
            key = (row["participant_id"], row["phase"], row["battery"])
            self.questionnaires[key] = list(row["values"])
        for row in self._read_json("knowledge.json", []):
            key = (row["participant_id"], row["phase"], row["aspect"], row["coder_id"])
            self.knowledge[key] = list(row["items"])
        for row in self._read_json("sessions/index.json", []):
            scenario = self.scenarios.get(row["scenario_id"])
            if scenario is None:
                raise ValueError(
                    f"session {row['session_id']} references unknown scenario "
                    f"{row['scenario_id']!r}; is the scenario directory right?")
            log_path = self.sessions_dir / row["log_file"]
            state = replay(parse_log(log_path.read_text(encoding="utf-8")), scenario)
            self.sessions[row["session_id"]] = _LiveSession(
                session_id=row["session_id"],
                participant_id=row["participant_id"],
                scenario=scenario,
                state=state,
                log_path=log_path,
                wall_anchor=self.clock(),
                persisted_events=len(state.log),
            )

    # -- participants and questionnaires ---------------------------------------

    def create_participant(self, participant_id: str | None, group: str,
                           metadata: dict | None) -> dict:
        if group not in ("staff", "visitor"):
            raise _invalid(f"group must be 'staff' or 'visitor', got {group!r}")
        with self._store_lock:
            if participant_id is None:
                participant_id = f"p-{uuid.uuid4().hex[:8]}"
            if participant_id in self.participants:
                raise _conflict("participant_exists",
                                f"participant {participant_id!r} already exists")
            record = {"id": participant_id, "group": group,
                      "metadata": dict(metadata or {})}
            self.participants[participant_id] = record
            self._save_participants()
            return record

    def _require_participant(self, participant_id: str) -> dict:
        record = self.participants.get(participant_id)
        if record is None:
            raise _not_found("unknown_participant",
                             f"participant {participant_id!r} does not exist")
        return record

    def submit_questionnaire(self, participant_id: str, phase: str,
                             battery: str, values) -> dict:
        self._require_participant(participant_id)
        if phase not in ("pre", "post"):
            raise _invalid(f"phase must be 'pre' or 'post', got {phase!r}")
        if battery not in BATTERIES:
            raise _invalid(f"unknown battery {battery!r}")
        if battery in POST_ONLY_BATTERIES and phase != "post":
            raise _invalid(f"{battery} is administered immediately after training; "
                           "it cannot be submitted at the pre phase")
        values = list(values)
        expected = BATTERIES[battery]
        if len(values) != expected:
            raise _invalid(f"{battery} requires exactly {expected} value(s), "
                           f"got {len(values)}")
        for v in values:
            if not isinstance(v, int) or isinstance(v, bool) or not -3 <= v <= 3:
                raise _invalid(f"values must be integers in [-3, 3], got {v!r}")
        with self._store_lock:
            self.questionnaires[(participant_id, phase, battery)] = values
            self._save_questionnaires()
        return {"participant_id": participant_id, "phase": phase,
                "battery": battery, "values": values}

    def submit_knowledge(self, participant_id: str, phase: str, aspect: str,
                         coder_id: int, items) -> dict:
        self._require_participant(participant_id)
        try:
            aspect_enum = KnowledgeAspect(aspect)
        except ValueError:
            raise _invalid(f"unknown knowledge aspect {aspect!r}")
        try:
            response = KnowledgeResponse(participant_id, phase, aspect_enum,
                                         coder_id, frozenset(items))
        except ValueError as exc:
            raise _invalid(str(exc))
        with self._store_lock:
            self.knowledge[(participant_id, phase, aspect, coder_id)] = sorted(response.items)
            self._save_knowledge()
        return {"participant_id": participant_id, "phase": phase, "aspect": aspect,
                "coder_id": coder_id, "items": sorted(response.items)}

    # -- sessions ---------------------------------------------------------------

    def create_session(self, scenario_id: str, participant_id: str) -> _LiveSession:
        scenario = self.scenarios.get(scenario_id)
        if scenario is None:
            raise _not_found("unknown_scenario",
                             f"scenario {scenario_id!r} is not loaded")
        self._require_participant(participant_id)
        with self._store_lock:
            session_id = f"s-{uuid.uuid4().hex[:12]}"
            state = start_session(scenario, participant_id)
            sess = _LiveSession(
                session_id=session_id,
                participant_id=participant_id,
                scenario=scenario,
                state=state,
                log_path=self.sessions_dir / f"{session_id}.log",
                wall_anchor=self.clock(),
            )
            self.sessions[session_id] = sess
            self._append_events(sess)
            self._save_session_index()
            return sess

    def _require_session(self, session_id: str) -> _LiveSession:
        sess = self.sessions.get(session_id)
        if sess is None:
            raise _not_found("unknown_session",
                             f"session {session_id!r} does not exist")
        return sess

    def _sync_clock(self, sess: _LiveSession) -> None:
        """Feed wall time that passed since the last command into the core."""
        now = self.clock()
        delta_ms = int((now - sess.wall_anchor) * 1000)
        if delta_ms <= 0 or sess.state.finished:
            return
        sess.state = advance_time(sess.scenario, sess.state, delta_ms)
        sess.wall_anchor += delta_ms / 1000.0
        self._append_events(sess)

    def state_view(self, sess: _LiveSession) -> dict:
        state = sess.state
        view = {
            "session_id": sess.session_id,
            "scenario_id": sess.scenario.id,
            "participant_id": sess.participant_id,
            "finished": state.finished,
            "elapsed_ms": state.elapsed_ms,
        }
        if state.finished:
            view.update({
                "node_id": None,
                "prompt": None,
                "options": [],
                "timeout_remaining_ms": None,
                "assessment": f"/sessions/{sess.session_id}/assessment",
            })
        else:
            node = sess.scenario.node(state.current_node)
            view.update({
                "node_id": node.id,
                "prompt": node.prompt,
                "options": [{"id": o.id, "label": o.label} for o in node.options],
                "timeout_remaining_ms": timeout_remaining_ms(sess.scenario, state),
            })
        return view

    def get_state(self, session_id: str) -> dict:
        sess = self._require_session(session_id)
        with sess.lock:
            return self.state_view(sess)

    def post_choice(self, session_id: str, option_id: str) -> dict:
        sess = self._require_session(session_id)
        with sess.lock:
            if sess.state.finished:
                raise _conflict("session_finished", "session is already finished")
            self._sync_clock(sess)
            if sess.state.finished:
                raise _conflict("session_finished",
                                "session ended by timeout before the choice arrived")
            node = sess.scenario.node(sess.state.current_node)
            if option_id not in [o.id for o in node.options]:
                raise _conflict("stale_option",
                                f"option {option_id!r} is not available at node "
                                f"{node.id!r}; refetch the session state")
            try:
                signal, sess.state = choose(sess.scenario, sess.state, option_id)
            except SessionError as exc:
                raise _conflict("stale_option", str(exc))
            self._append_events(sess)
            return {"color": signal.color.value, "state": self.state_view(sess)}

    def get_assessment(self, session_id: str) -> dict:
        sess = self._require_session(session_id)
        with sess.lock:
            if not sess.state.finished:
                raise _conflict("session_active",
                                "assessment is available once the session finishes")
            report = build_report(sess.state.log, sess.scenario,
                                  session_id=sess.session_id)
            return report_to_dict(report)

    def sweep_once(self) -> int:
        """Fire due timeouts across all active sessions; returns fire count."""
        fired = 0
        for sess in list(self.sessions.values()):
            with sess.lock:
                if sess.state.finished:
                    continue
                before = len(sess.state.log)
                self._sync_clock(sess)
                fired += sum(1 for ev in sess.state.log[before:]
                             if ev.kind == "timeout_fired")
        return fired

    # -- analytics ---------------------------------------------------------------

    def _knowledge_records(self) -> list[CohortRecord]:
        records: list[CohortRecord] = []
        for pid, participant in self.participants.items():
            for aspect in KnowledgeAspect:
                merged: dict[str, frozenset] = {}
                for phase in ("pre", "post"):
                    responses = [
                        KnowledgeResponse(pid, phase, aspect, coder,
                                          frozenset(self.knowledge[(pid, phase, aspect.value, coder)]))
                        for coder in (1, 2, 3)
                        if (pid, phase, aspect.value, coder) in self.knowledge
                    ]
                    if len(responses) == 3:
                        merged[phase] = merge_coders(responses)
                if len(merged) == 2:
                    records.append(CohortRecord(
                        pid, participant["group"], aspect.value,
                        score_knowledge(aspect, merged["pre"]).score,
                        score_knowledge(aspect, merged["post"]).score,
                    ))
        return records

    def _self_efficacy_records(self) -> list[CohortRecord]:
        paired = [
            pid for pid in self.participants
            if (pid, "pre", "self_efficacy") in self.questionnaires
            and (pid, "post", "self_efficacy") in self.questionnaires
        ]
        if not paired:
            return []
        rows = []
        for pid in paired:
            rows.append(self.questionnaires[(pid, "pre", "self_efficacy")])
            rows.append(self.questionnaires[(pid, "post", "self_efficacy")])
        try:
            scores = factor_scores(rows).scores
        except ValueError:
            return []
        records = []
        for i, pid in enumerate(paired):
            records.append(CohortRecord(pid, self.participants[pid]["group"],
                                        "self_efficacy", scores[2 * i], scores[2 * i + 1]))
        return records

    def cohort(self, group: str | None = None, measure: str | None = None) -> dict:
        group = group or None  # empty query value means "no filter"
        measure = measure or None
        if group is not None and group not in ("staff", "visitor"):
            raise _invalid(f"group filter must be 'staff' or 'visitor', got {group!r}")
        if measure is not None and measure not in MEASURES:
            raise _invalid(f"measure filter must be one of {MEASURES}, got {measure!r}")
        records = self._knowledge_records() + self._self_efficacy_records()
        if group is not None:
            records = [r for r in records if r.group == group]
        if measure is not None:
            records = [r for r in records if r.measure == measure]
        if not records:
            raise _conflict("no_paired_data",
                            "no participants with paired pre/post data match the filter")
        return cohort_table_to_dict(cohort_analysis(records))


# --- FastAPI wiring -------------------------------------------------------------


class ParticipantIn(BaseModel):
    id: str | None = None
    group: str
    metadata: dict[str, str] | None = None


class SessionIn(BaseModel):
    scenario_id: str
    participant_id: str


class ChoiceIn(BaseModel):
    option_id: str


class QuestionnaireIn(BaseModel):
    phase: str
    battery: str
    values: list[int]


class KnowledgeIn(BaseModel):
    phase: str
    aspect: str
    coder_id: int
    items: list[str]


def create_app(scenario_dir, data_dir, clock=time.monotonic,
               sweep_interval: float | None = None) -> FastAPI:
    """Build the service app; pass ``sweep_interval`` to run the timeout
    sweeper thread (the CLI uses 0.25 s)."""
    store = Store(scenario_dir, data_dir, clock=clock)

    lifespan = None
    if sweep_interval:
        from contextlib import asynccontextmanager

        stop = threading.Event()

        def sweeper():
            while not stop.wait(sweep_interval):
                store.sweep_once()

        @asynccontextmanager
        async def lifespan(app: FastAPI):
            thread = threading.Thread(target=sweeper, daemon=True,
                                      name="timeout-sweeper")
            thread.start()
            yield
            stop.set()
            thread.join(timeout=2.0)

    app = FastAPI(title="quakedrill", version="0.1.0", lifespan=lifespan)
    app.state.store = store
    # the trainee UI may be served from any static host at desk scale
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"error": {"code": exc.code, "message": exc.message}})

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422,
                            content={"error": {"code": "validation_error",
                                               "message": str(exc.errors())}})

    @app.post("/participants", status_code=201)
    def create_participant(body: ParticipantIn):
        return store.create_participant(body.id, body.group, body.metadata)

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionIn):
        sess = store.create_session(body.scenario_id, body.participant_id)
        return {"session_id": sess.session_id, "state": store.state_view(sess)}

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        return store.get_state(session_id)

    @app.post("/sessions/{session_id}/choice")
    def post_choice(session_id: str, body: ChoiceIn):
        return store.post_choice(session_id, body.option_id)

    @app.get("/sessions/{session_id}/assessment")
    def get_assessment(session_id: str):
        return store.get_assessment(session_id)

    @app.post("/participants/{participant_id}/questionnaire", status_code=201)
    def submit_questionnaire(participant_id: str, body: QuestionnaireIn):
        return store.submit_questionnaire(participant_id, body.phase,
                                          body.battery, body.values)

    @app.post("/participants/{participant_id}/knowledge", status_code=201)
    def submit_knowledge(participant_id: str, body: KnowledgeIn):
        return store.submit_knowledge(participant_id, body.phase, body.aspect,
                                      body.coder_id, body.items)

    @app.get("/analysis/cohort")
    def get_cohort(group: str | None = None, measure: str | None = None):
        return store.cohort(group=group, measure=measure)

    return app
