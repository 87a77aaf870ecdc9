"""Domain model for branching evacuation-drill scenarios.

A scenario is a graph of decision nodes pinned to waypoints. Each node
presents action options; an option either moves the trainee to another
node or ends the drill (``next_node is None``). Options may carry a
behavior tag from the scenario's catalog, which is how authored drills
declare which recommended behaviors they teach.

Everything here is an immutable value type. ``validate_scenario`` never
raises on bad content: structural problems come back as report entries so
authoring tools can show all of them at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import math

#: Marker for "drill ends here" wherever a node id is expected.
TERMINAL = None


class Phase(Enum):
    """The three drill phases a behavior belongs to."""

    INDOOR_EARTHQUAKE = "indoor_earthquake"
    PRE_EVACUATION_INDOOR = "pre_evacuation_indoor"
    OUTDOOR_EVACUATION = "outdoor_evacuation"


@dataclass(frozen=True)
class Behavior:
    tag: str
    phase: Phase
    description: str


@dataclass(frozen=True)
class Waypoint:
    id: str
    position: tuple[float, float, float]
    label: str = ""


@dataclass(frozen=True)
class Route:
    origin: str
    dest: str
    path: tuple[tuple[float, float, float], ...] = ()


@dataclass(frozen=True)
class ActionOption:
    id: str
    label: str
    recommended: bool
    rationale: str
    next_node: str | None
    behavior_tag: str | None = None


@dataclass(frozen=True)
class TimeoutRule:
    after_ms: int
    outcome_event: str
    outcome_text: str
    next_node: str | None


@dataclass(frozen=True)
class DecisionNode:
    id: str
    waypoint: str
    prompt: str
    options: tuple[ActionOption, ...]
    timeout: TimeoutRule | None = None


@dataclass(frozen=True)
class Scenario:
    id: str
    title: str
    behaviors: tuple[Behavior, ...]
    waypoints: tuple[Waypoint, ...]
    routes: tuple[Route, ...]
    nodes: tuple[DecisionNode, ...]
    start_node: str

    def node(self, node_id: str) -> DecisionNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def behavior_tags(self) -> list[str]:
        return [b.tag for b in self.behaviors]


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    location: str
    message: str


@dataclass
class ValidationReport:
    errors: list[ValidationIssue] = field(default_factory=list)
    warnings: list[ValidationIssue] = field(default_factory=list)
    coverage: dict[str, list[str]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


def _successors(node: DecisionNode) -> list[str | None]:
    succ: list[str | None] = [opt.next_node for opt in node.options]
    if node.timeout is not None:
        succ.append(node.timeout.next_node)
    return succ


def behavior_coverage(scenario: Scenario) -> dict[str, list[str]]:
    """Map every catalog behavior tag to the nodes whose recommended
    options carry it. Tags never offered map to an empty list."""
    coverage: dict[str, list[str]] = {b.tag: [] for b in scenario.behaviors}
    for node in scenario.nodes:
        for opt in node.options:
            if opt.recommended and opt.behavior_tag in coverage:
                if node.id not in coverage[opt.behavior_tag]:
                    coverage[opt.behavior_tag].append(node.id)
    return coverage


def validate_scenario(scenario: Scenario) -> ValidationReport:
    """Check every scenario invariant and compute behavior coverage.

    Pure and idempotent: the same scenario always yields an identical
    report. ``errors`` is empty exactly when the scenario is playable.
    """
    report = ValidationReport()
    err = report.errors.append
    warn = report.warnings.append

    seen_tags: set[str] = set()
    for b in scenario.behaviors:
        if b.tag in seen_tags:
            err(ValidationIssue("duplicate_behavior_tag", f"behavior {b.tag}",
                                f"behavior tag {b.tag!r} declared more than once"))
        seen_tags.add(b.tag)

    seen_wps: set[str] = set()
    for wp in scenario.waypoints:
        if wp.id in seen_wps:
            err(ValidationIssue("duplicate_waypoint_id", f"waypoint {wp.id}",
                                f"waypoint id {wp.id!r} declared more than once"))
        seen_wps.add(wp.id)
        if not all(math.isfinite(c) for c in wp.position):
            err(ValidationIssue("nonfinite_position", f"waypoint {wp.id}",
                                f"waypoint {wp.id!r} has a non-finite coordinate"))

    for route in scenario.routes:
        loc = f"route {route.origin} -> {route.dest}"
        if route.origin == route.dest:
            err(ValidationIssue("route_self_loop", loc,
                                "route must connect two distinct waypoints"))
        for end in (route.origin, route.dest):
            if end not in seen_wps:
                err(ValidationIssue("dangling_route_endpoint", loc,
                                    f"route references unknown waypoint {end!r}"))

    node_ids: set[str] = set()
    for node in scenario.nodes:
        if node.id in node_ids:
            err(ValidationIssue("duplicate_node_id", f"node {node.id}",
                                f"node id {node.id!r} declared more than once"))
        node_ids.add(node.id)

    for node in scenario.nodes:
        loc = f"node {node.id}"
        if node.waypoint not in seen_wps:
            err(ValidationIssue("dangling_waypoint", loc,
                                f"node {node.id!r} sits at unknown waypoint {node.waypoint!r}"))
        if not node.options:
            err(ValidationIssue("empty_options", loc,
                                f"node {node.id!r} offers no options"))
        seen_opts: set[str] = set()
        for opt in node.options:
            oloc = f"{loc} option {opt.id}"
            if opt.id in seen_opts:
                err(ValidationIssue("duplicate_option_id", oloc,
                                    f"option id {opt.id!r} repeated within node {node.id!r}"))
            seen_opts.add(opt.id)
            if opt.next_node is not TERMINAL and opt.next_node not in node_ids:
                err(ValidationIssue("dangling_next_node", oloc,
                                    f"option {opt.id!r} points at unknown node {opt.next_node!r}"))
            if opt.behavior_tag is not None and opt.behavior_tag not in seen_tags:
                err(ValidationIssue("unknown_behavior_tag", oloc,
                                    f"option {opt.id!r} references unknown behavior {opt.behavior_tag!r}"))
        if node.timeout is not None:
            tloc = f"{loc} timeout"
            if node.timeout.after_ms <= 0:
                err(ValidationIssue("nonpositive_timeout", tloc,
                                    "timeout duration must be positive"))
            if node.timeout.next_node is not TERMINAL and node.timeout.next_node not in node_ids:
                err(ValidationIssue("dangling_next_node", tloc,
                                    f"timeout points at unknown node {node.timeout.next_node!r}"))

    if scenario.start_node not in node_ids:
        err(ValidationIssue("dangling_start_node", "scenario",
                            f"start node {scenario.start_node!r} does not exist"))
    else:
        by_id = {n.id: n for n in scenario.nodes}
        reachable: set[str] = set()
        stack = [scenario.start_node]
        while stack:
            nid = stack.pop()
            if nid in reachable:
                continue
            reachable.add(nid)
            for succ in _successors(by_id[nid]):
                if succ is not TERMINAL and succ in by_id:
                    stack.append(succ)

        for nid in sorted(node_ids - reachable):
            err(ValidationIssue("unreachable_node", f"node {nid}",
                                f"node {nid!r} cannot be reached from the start node"))

        # Escape analysis: every reachable node must still be able to end
        # the drill, otherwise a cycle with no exit could trap a session.
        can_finish: set[str] = set()
        changed = True
        while changed:
            changed = False
            for nid in reachable:
                if nid in can_finish:
                    continue
                for succ in _successors(by_id[nid]):
                    if succ is TERMINAL or succ in can_finish:
                        can_finish.add(nid)
                        changed = True
                        break
        if scenario.start_node not in can_finish:
            err(ValidationIssue("no_terminal_path", "scenario",
                                "no path from the start node ever ends the drill"))
        else:
            for nid in sorted(reachable - can_finish):
                err(ValidationIssue("unescapable_cycle", f"node {nid}",
                                    f"node {nid!r} is caught in a cycle with no way to end the drill"))

    report.coverage = behavior_coverage(scenario)
    for tag, nodes in report.coverage.items():
        if not nodes:
            warn(ValidationIssue("uncovered_behavior", f"behavior {tag}",
                                 f"behavior {tag!r} is never offered by a recommended option"))
    return report
