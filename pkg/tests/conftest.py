from __future__ import annotations

import pytest
from hypothesis import strategies as st

from quakedrill import bundled_scenario
from quakedrill.model import (
    ActionOption,
    Behavior,
    DecisionNode,
    Phase,
    Route,
    Scenario,
    TimeoutRule,
    Waypoint,
)


@pytest.fixture(scope="session")
def ach():
    return bundled_scenario("ach")


def make_minimal_scenario(**overrides) -> Scenario:
    """One behavior, one waypoint, one node with a recommended terminal option."""
    fields = dict(
        id="mini",
        title="mini",
        behaviors=(Behavior("duck", Phase.INDOOR_EARTHQUAKE, "Duck down"),),
        waypoints=(Waypoint("room", (0.0, 0.0, 0.0), "the room"),),
        routes=(),
        nodes=(DecisionNode(
            "start", "room", "The room shakes.",
            (ActionOption("duck_now", "Duck under the desk", True,
                          "Desks stop falling tiles.", None, "duck"),),
        ),),
        start_node="start",
    )
    fields.update(overrides)
    return Scenario(**fields)


@pytest.fixture
def minimal():
    return make_minimal_scenario()


# --- generated valid scenarios ------------------------------------------------
#
# Nodes are generated as a chain: node i's first option always points to
# node i+1 (terminal for the last), extra options and timeouts point only
# forward. That makes every generated scenario valid by construction:
# all nodes reachable, no cycles, terminal always reachable.

_IDENT = st.from_regex(r"[a-z][a-z0-9_]{0,7}", fullmatch=True)
_TEXT = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=24)
_COORD = st.floats(allow_nan=False, allow_infinity=False, width=32)
_PHASE = st.sampled_from(list(Phase))


@st.composite
def valid_scenarios(draw) -> Scenario:
    title = draw(_TEXT)
    behavior_tags = draw(st.lists(_IDENT, min_size=0, max_size=3, unique=True))
    behaviors = tuple(
        Behavior(tag, draw(_PHASE), draw(_TEXT)) for tag in behavior_tags)

    waypoint_ids = draw(st.lists(_IDENT, min_size=1, max_size=3, unique=True))
    waypoints = tuple(
        Waypoint(wid, (draw(_COORD), draw(_COORD), draw(_COORD)), draw(_TEXT))
        for wid in waypoint_ids)
    routes = ()
    if len(waypoint_ids) >= 2:
        n_routes = draw(st.integers(0, 2))
        pairs = draw(st.lists(
            st.tuples(st.sampled_from(waypoint_ids), st.sampled_from(waypoint_ids))
            .filter(lambda p: p[0] != p[1]),
            min_size=n_routes, max_size=n_routes))
        routes = tuple(Route(a, b) for a, b in pairs)

    node_count = draw(st.integers(1, 5))
    node_ids = [f"n{i}" for i in range(node_count)]

    def forward_target(i) -> str | None:
        later = node_ids[i + 1:]
        return draw(st.sampled_from(later + [None])) if later else None

    nodes = []
    for i, nid in enumerate(node_ids):
        first_target = node_ids[i + 1] if i + 1 < node_count else None
        option_count = draw(st.integers(1, 3))
        options = []
        for j in range(option_count):
            recommended = draw(st.booleans())
            tag = None
            if recommended and behavior_tags and draw(st.booleans()):
                tag = draw(st.sampled_from(behavior_tags))
            options.append(ActionOption(
                f"o{j}", draw(_TEXT), recommended, draw(_TEXT),
                first_target if j == 0 else forward_target(i), tag))
        timeout = None
        if draw(st.booleans()):
            timeout = TimeoutRule(draw(st.integers(1, 20_000)), draw(_IDENT),
                                  draw(_TEXT), forward_target(i))
        nodes.append(DecisionNode(nid, draw(st.sampled_from(waypoint_ids)),
                                  draw(_TEXT), tuple(options), timeout))

    return Scenario(id=title, title=title, behaviors=behaviors,
                    waypoints=waypoints, routes=routes, nodes=tuple(nodes),
                    start_node=node_ids[0])
