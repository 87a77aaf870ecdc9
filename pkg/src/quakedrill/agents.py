"""Scripted agents that play drills without a human.

Agents exist so every scenario path is exercisable from tests and the
command line: the optimal agent proves a drill's behaviors are all
reachable, the worst agent proves the red paths are graded correctly,
the seeded random agent generates reproducible traffic (optionally
stalling into timeouts), and the script agent replays an explicit
option-id list.

All agents run on simulated time: a fixed thinking delay before each
choice, so a given agent, scenario, and seed always produce an
identical event log.
"""

from __future__ import annotations

import random

from .model import Scenario
from .runtime import SessionState, advance_time, available_actions, choose, start_session

#: Simulated time an agent spends looking at a node before acting.
THINK_MS = 1000


class AgentScriptError(Exception):
    """A scripted playthrough referenced an option that is not available."""

    def __init__(self, step: int, option_id: str, node_id: str):
        self.step = step
        self.option_id = option_id
        self.node_id = node_id
        super().__init__(
            f"step {step}: option {option_id!r} is not available at node {node_id!r}")


def _think_delay(scenario: Scenario, state: SessionState) -> int:
    """Thinking time that never trips the current node's timeout."""
    rule = scenario.node(state.current_node).timeout
    if rule is not None and rule.after_ms <= THINK_MS:
        return max(rule.after_ms - 1, 0)
    return THINK_MS


def run_optimal(scenario: Scenario, participant_id: str = "agent-optimal") -> SessionState:
    """Always pick the first recommended option (authored order breaks ties)."""
    state = start_session(scenario, participant_id)
    while not state.finished:
        state = advance_time(scenario, state, _think_delay(scenario, state))
        options = available_actions(scenario, state)
        pick = next((o for o in options if o.recommended), options[0])
        _, state = choose(scenario, state, pick.id)
    return state


def run_worst(scenario: Scenario, participant_id: str = "agent-worst") -> SessionState:
    """Pick a non-recommended option wherever one exists; never stall."""
    state = start_session(scenario, participant_id)
    while not state.finished:
        state = advance_time(scenario, state, _think_delay(scenario, state))
        options = available_actions(scenario, state)
        pick = next((o for o in options if not o.recommended), options[0])
        _, state = choose(scenario, state, pick.id)
    return state


def run_random(scenario: Scenario, seed: int, stall: float = 0.0,
               participant_id: str | None = None) -> SessionState:
    """Pick uniformly among options; with probability ``stall`` at a node
    that has a timeout, do nothing and let it fire instead."""
    if not 0.0 <= stall <= 1.0:
        raise ValueError("stall probability must be in [0, 1]")
    rng = random.Random(seed)
    if participant_id is None:
        participant_id = f"agent-random-{seed}"
    state = start_session(scenario, participant_id)
    while not state.finished:
        rule = scenario.node(state.current_node).timeout
        if rule is not None and rng.random() < stall:
            state = advance_time(scenario, state, rule.after_ms)
            continue
        state = advance_time(scenario, state, _think_delay(scenario, state))
        options = available_actions(scenario, state)
        pick = rng.choice(options)
        _, state = choose(scenario, state, pick.id)
    return state


def run_script(scenario: Scenario, option_ids, participant_id: str = "agent-script") -> SessionState:
    """Apply an explicit option-id sequence; the session must finish."""
    option_ids = list(option_ids)
    state = start_session(scenario, participant_id)
    for step, option_id in enumerate(option_ids, start=1):
        if state.finished:
            raise AgentScriptError(step, option_id, "<finished>")
        state = advance_time(scenario, state, _think_delay(scenario, state))
        options = available_actions(scenario, state)
        if option_id not in [o.id for o in options]:
            raise AgentScriptError(step, option_id, state.current_node)
        _, state = choose(scenario, state, option_id)
    if not state.finished:
        raise AgentScriptError(len(option_ids) + 1, "<none>", state.current_node)
    return state
