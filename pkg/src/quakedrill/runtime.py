"""Deterministic drill session state machine.

A session is driven by two commands: ``choose`` an option at the current
node, or ``advance_time`` on an injected clock. Both are pure functions
from one immutable :class:`SessionState` to the next, so a session is
fully determined by the scenario plus its command sequence, and any
recorded event log can be replayed bit-for-bit.

The core never reads the wall clock. Timestamps are milliseconds since
session start; timeout deadlines are computed from when a node was
entered, so chopping time into different ``advance_time`` deltas never
changes which events fire.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
import json

from .model import Scenario, validate_scenario

EVENT_KINDS = ("session_start", "enter_node", "choice", "feedback",
               "timeout_fired", "session_end")


class Color(Enum):
    GREEN = "green"
    RED = "red"


@dataclass(frozen=True)
class FeedbackSignal:
    color: Color


@dataclass(frozen=True)
class SessionEvent:
    at_ms: int
    kind: str
    node_id: str | None = None
    option_id: str | None = None
    feedback: FeedbackSignal | None = None
    detail: str = ""


@dataclass(frozen=True)
class SessionState:
    scenario_id: str
    participant_id: str
    current_node: str | None
    elapsed_ms: int
    node_entered_at_ms: int
    performed: frozenset[tuple[str, str]]
    log: tuple[SessionEvent, ...]

    @property
    def finished(self) -> bool:
        return self.current_node is None


class SessionError(Exception):
    """Command rejected: session finished or option not available."""


class ReplayError(Exception):
    """Event log is inconsistent with the scenario or with itself."""


def start_session(scenario: Scenario, participant_id: str) -> SessionState:
    """Open a session at the scenario's start node, clock at zero.

    Rejects scenarios that do not validate cleanly; the runtime relies on
    every node reference resolving.
    """
    report = validate_scenario(scenario)
    if not report.ok:
        first = report.errors[0]
        raise ValueError(
            f"scenario {scenario.id!r} has {len(report.errors)} validation "
            f"error(s), first: [{first.code}] {first.message}")
    opening = json.dumps({"scenario": scenario.id, "participant": participant_id},
                         ensure_ascii=False)
    log = (
        SessionEvent(0, "session_start", detail=opening),
        SessionEvent(0, "enter_node", node_id=scenario.start_node),
    )
    return SessionState(
        scenario_id=scenario.id,
        participant_id=participant_id,
        current_node=scenario.start_node,
        elapsed_ms=0,
        node_entered_at_ms=0,
        performed=frozenset(),
        log=log,
    )


def available_actions(scenario: Scenario, state: SessionState):
    """The options of the current node, in authored order."""
    if state.finished:
        raise SessionError("session is finished; no actions available")
    return list(scenario.node(state.current_node).options)


def choose(scenario: Scenario, state: SessionState,
           option_id: str) -> tuple[FeedbackSignal, SessionState]:
    """Apply one action panel choice and emit its immediate feedback.

    Green feedback means the option was recommended, red otherwise. The
    choice and its feedback share one timestamp, followed by either an
    ``enter_node`` or a ``session_end`` record.
    """
    if state.finished:
        raise SessionError("session is finished; cannot choose")
    node = scenario.node(state.current_node)
    option = next((o for o in node.options if o.id == option_id), None)
    if option is None:
        raise SessionError(
            f"option {option_id!r} is not available at node {node.id!r}")

    signal = FeedbackSignal(Color.GREEN if option.recommended else Color.RED)
    now = state.elapsed_ms
    events = [
        SessionEvent(now, "choice", node_id=node.id, option_id=option.id,
                     detail=option.label),
        SessionEvent(now, "feedback", node_id=node.id, option_id=option.id,
                     feedback=signal),
    ]
    if option.next_node is None:
        events.append(SessionEvent(now, "session_end"))
    else:
        events.append(SessionEvent(now, "enter_node", node_id=option.next_node))

    new_state = replace(
        state,
        current_node=option.next_node,
        node_entered_at_ms=now,
        performed=state.performed | {(node.id, option.id)},
        log=state.log + tuple(events),
    )
    return signal, new_state


def advance_time(scenario: Scenario, state: SessionState,
                 delta_ms: int) -> SessionState:
    """Move the session clock forward, firing any due timeouts.

    A node's timeout fires once elapsed time since entering it reaches
    the rule's duration (closed bound). Fired events are stamped with the
    post-advance clock; follow-on nodes inherit the deadline as their
    entry time so chained timeouts stay physically consistent. Each node
    fires at most once per call.
    """
    if state.finished:
        raise SessionError("session is finished; cannot advance time")
    if delta_ms < 0:
        raise ValueError("delta_ms must be >= 0")

    now = state.elapsed_ms + delta_ms
    current = state.current_node
    entered = state.node_entered_at_ms
    events: list[SessionEvent] = []
    fired: set[str] = set()

    while current is not None:
        rule = scenario.node(current).timeout
        if rule is None or current in fired:
            break
        deadline = entered + rule.after_ms
        if now < deadline:
            break
        fired.add(current)
        events.append(SessionEvent(
            now, "timeout_fired", node_id=current,
            detail=f"{rule.outcome_event}: {rule.outcome_text}"))
        current = rule.next_node
        entered = deadline
        if current is None:
            events.append(SessionEvent(now, "session_end"))
        else:
            events.append(SessionEvent(now, "enter_node", node_id=current))

    return replace(
        state,
        current_node=current,
        elapsed_ms=now,
        node_entered_at_ms=entered,
        log=state.log + tuple(events),
    )


def timeout_remaining_ms(scenario: Scenario, state: SessionState) -> int | None:
    """Milliseconds until the current node's timeout fires, or None."""
    if state.finished:
        return None
    rule = scenario.node(state.current_node).timeout
    if rule is None:
        return None
    return max(0, state.node_entered_at_ms + rule.after_ms - state.elapsed_ms)


def replay(log, scenario: Scenario) -> SessionState:
    """Rebuild the session state a log describes by re-executing it.

    The log's choices and timeouts are re-applied in order against the
    scenario; the reconstruction must reproduce the given log exactly,
    which catches unknown node/option references, nonmonotonic
    timestamps, wrong feedback colors, and scenario mismatches alike.
    """
    log = tuple(log)
    if not log or log[0].kind != "session_start":
        raise ReplayError("log must begin with a session_start event")
    try:
        opening = json.loads(log[0].detail)
        scenario_id = opening["scenario"]
        participant_id = opening["participant"]
    except (ValueError, TypeError, KeyError):
        raise ReplayError("session_start detail lacks scenario/participant ids")
    if scenario_id != scenario.id:
        raise ReplayError(
            f"log is for scenario {scenario_id!r}, not {scenario.id!r}")

    last = 0
    for ev in log:
        if ev.at_ms < last:
            raise ReplayError(f"timestamps go backwards at {ev.at_ms}ms")
        last = ev.at_ms

    state = start_session(scenario, participant_id)
    try:
        for ev in log:
            if ev.kind == "choice":
                if ev.at_ms > state.elapsed_ms:
                    state = advance_time(scenario, state, ev.at_ms - state.elapsed_ms)
                _, state = choose(scenario, state, ev.option_id)
            elif ev.kind == "timeout_fired":
                if ev.at_ms > state.elapsed_ms:
                    state = advance_time(scenario, state, ev.at_ms - state.elapsed_ms)
    except (SessionError, KeyError) as exc:
        raise ReplayError(f"log cannot be re-executed: {exc}") from exc

    if state.log != log:
        raise ReplayError("log does not match its re-execution")
    return state


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}


def _quote_detail(text: str) -> str:
    return '"' + "".join(_ESCAPES.get(c, c) for c in text) + '"'


def _unquote_detail(text: str, lineno: int) -> str:
    if len(text) < 2 or not (text.startswith('"') and text.endswith('"')):
        raise ReplayError(f"line {lineno}: detail field is not quoted")
    body = text[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body) and body[i + 1] in _UNESCAPES:
            out.append(_UNESCAPES[body[i + 1]])
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def format_event(event: SessionEvent) -> str:
    """One tab-separated log line: at_ms, kind, node, option, color, detail."""
    color = event.feedback.color.value if event.feedback else "-"
    return "\t".join([
        str(event.at_ms),
        event.kind,
        event.node_id if event.node_id is not None else "-",
        event.option_id if event.option_id is not None else "-",
        color,
        _quote_detail(event.detail),
    ])


def serialize_log(log) -> str:
    return "".join(format_event(ev) + "\n" for ev in log)


def parse_log(text: str) -> tuple[SessionEvent, ...]:
    """Parse event-log text back into events; inverse of serialize_log."""
    events: list[SessionEvent] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise ReplayError(f"line {lineno}: expected 6 tab-separated fields")
        at_raw, kind, node_id, option_id, color, detail = fields
        try:
            at_ms = int(at_raw)
        except ValueError:
            raise ReplayError(f"line {lineno}: bad timestamp {at_raw!r}")
        if kind not in EVENT_KINDS:
            raise ReplayError(f"line {lineno}: unknown event kind {kind!r}")
        feedback = None
        if color != "-":
            try:
                feedback = FeedbackSignal(Color(color))
            except ValueError:
                raise ReplayError(f"line {lineno}: unknown color {color!r}")
        events.append(SessionEvent(
            at_ms=at_ms,
            kind=kind,
            node_id=None if node_id == "-" else node_id,
            option_id=None if option_id == "-" else option_id,
            feedback=feedback,
            detail=_unquote_detail(detail, lineno),
        ))
    if not events or events[0].kind != "session_start":
        raise ReplayError("log file must begin with a session_start record")
    return tuple(events)
