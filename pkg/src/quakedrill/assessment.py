"""Post-drill assessment and knowledge scoring.

Two instruments live here. ``build_report`` grades a finished session
log against the scenario's behavior catalog and prepares the choice-by-
choice rationale playback shown after a drill. ``score_knowledge`` maps
coded open-answer checklists onto the 1..4 knowledge scale, with
``merge_coders`` combining the three independent coders' checklists by
majority before scoring.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import json

from .model import Scenario, behavior_coverage
from .runtime import replay


class Status(Enum):
    PERFORMED = "performed"
    DECLINED = "declined"
    TIMED_OUT = "timed_out"
    NOT_ENCOUNTERED = "not_encountered"


@dataclass(frozen=True)
class BehaviorOutcome:
    behavior_tag: str
    status: Status
    node_id: str | None
    rationale: str


@dataclass(frozen=True)
class PlaybackEntry:
    node_id: str
    option_id: str
    label: str
    recommended: bool
    rationale: str


@dataclass(frozen=True)
class AssessmentReport:
    session_id: str
    outcomes: tuple[BehaviorOutcome, ...]
    playback: tuple[PlaybackEntry, ...]
    score_summary: dict[str, int] = field(hash=False)


def build_report(log, scenario: Scenario, session_id: str | None = None) -> AssessmentReport:
    """Grade a finished session log against the behavior catalog.

    Each catalog behavior gets exactly one status:

    * performed — a green choice carrying its tag appears in the log;
    * timed_out — a timeout fired at a node offering it before any
      choice was made there;
    * declined — a node offering it was visited and resolved by a choice
      that did not perform it;
    * not_encountered — no offering node was ever visited.
    """
    state = replay(log, scenario)
    if not state.finished:
        raise ValueError("cannot assess an unfinished session")
    if session_id is None:
        session_id = f"{scenario.id}:{state.participant_id}"

    coverage = behavior_coverage(scenario)
    options = {(n.id, o.id): o for n in scenario.nodes for o in n.options}

    visited: set[str] = set()
    timed_out_nodes: set[str] = set()
    playback: list[PlaybackEntry] = []
    green_tags: dict[str, tuple[str, str]] = {}  # tag -> (node, rationale)
    for ev in state.log:
        if ev.kind == "enter_node":
            visited.add(ev.node_id)
        elif ev.kind == "timeout_fired":
            timed_out_nodes.add(ev.node_id)
        elif ev.kind == "choice":
            opt = options[(ev.node_id, ev.option_id)]
            playback.append(PlaybackEntry(ev.node_id, opt.id, opt.label,
                                          opt.recommended, opt.rationale))
            if opt.recommended and opt.behavior_tag is not None:
                green_tags.setdefault(opt.behavior_tag, (ev.node_id, opt.rationale))

    def authored_rationale(tag: str, node_id: str) -> str:
        for opt in scenario.node(node_id).options:
            if opt.recommended and opt.behavior_tag == tag:
                return opt.rationale
        return ""

    outcomes: list[BehaviorOutcome] = []
    for behavior in scenario.behaviors:
        tag = behavior.tag
        offering = coverage[tag]
        if tag in green_tags:
            node_id, rationale = green_tags[tag]
            outcomes.append(BehaviorOutcome(tag, Status.PERFORMED, node_id, rationale))
            continue
        timed = [n for n in offering if n in timed_out_nodes]
        if timed:
            outcomes.append(BehaviorOutcome(tag, Status.TIMED_OUT, timed[0],
                                            authored_rationale(tag, timed[0])))
            continue
        seen = [n for n in offering if n in visited]
        if seen:
            outcomes.append(BehaviorOutcome(tag, Status.DECLINED, seen[0],
                                            authored_rationale(tag, seen[0])))
            continue
        outcomes.append(BehaviorOutcome(tag, Status.NOT_ENCOUNTERED, None, ""))

    summary = {status.value: 0 for status in Status}
    for outcome in outcomes:
        summary[outcome.status.value] += 1

    return AssessmentReport(session_id, tuple(outcomes), tuple(playback), summary)


def playback_script(report: AssessmentReport) -> list[tuple[str, str]]:
    """Caption/rationale pairs for the step-through playback, in choice order."""
    return [(entry.label, entry.rationale) for entry in report.playback]


def report_to_dict(report: AssessmentReport) -> dict:
    """Plain-dict form of a report with a stable key order."""
    return {
        "session_id": report.session_id,
        "outcomes": [
            {
                "behavior_tag": o.behavior_tag,
                "status": o.status.value,
                "node_id": o.node_id,
                "rationale": o.rationale,
            }
            for o in report.outcomes
        ],
        "playback": [
            {
                "node_id": e.node_id,
                "option_id": e.option_id,
                "label": e.label,
                "recommended": e.recommended,
                "rationale": e.rationale,
            }
            for e in report.playback
        ],
        "score_summary": {s.value: report.score_summary[s.value] for s in Status},
    }


def report_to_json(report: AssessmentReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n"


# --- knowledge scale -------------------------------------------------------

class KnowledgeAspect(Enum):
    DURING_INDOOR = "during_indoor"
    AFTER_INDOOR = "after_indoor"
    AFTER_OUTDOOR = "after_outdoor"

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return _VOCABULARIES[self]


DURING_INDOOR_ITEMS = ("dch_under_table", "attention_falling", "generic_cover")

AFTER_INDOOR_ITEMS = (
    "stay_under_cover",
    "collect_personal_items",
    "first_aid_kit",
    "help_people_around",
    "search_alternative_exits",
    "attention_fire",
    "fire_extinguisher_or_call",
    "attention_electric_leakage",
    "unplug_equipment",
    "listen_radio",
    "use_stairs",
)

AFTER_OUTDOOR_ITEMS = ("open_space_away", "no_return_until_safe", "assembly_point_only")

_VOCABULARIES = {
    KnowledgeAspect.DURING_INDOOR: DURING_INDOOR_ITEMS,
    KnowledgeAspect.AFTER_INDOOR: AFTER_INDOOR_ITEMS,
    KnowledgeAspect.AFTER_OUTDOOR: AFTER_OUTDOOR_ITEMS,
}

SCORE_VALUES = (1.0, 2.0, 2.5, 3.0, 3.5, 4.0)


@dataclass(frozen=True)
class KnowledgeScore:
    aspect: KnowledgeAspect
    score: float


@dataclass(frozen=True)
class KnowledgeResponse:
    participant_id: str
    phase: str  # "pre" | "post"
    aspect: KnowledgeAspect
    coder_id: int
    items: frozenset[str]

    def __post_init__(self):
        if self.phase not in ("pre", "post"):
            raise ValueError(f"phase must be 'pre' or 'post', got {self.phase!r}")
        if self.coder_id not in (1, 2, 3):
            raise ValueError(f"coder_id must be 1..3, got {self.coder_id}")
        unknown = self.items - set(self.aspect.vocabulary)
        if unknown:
            raise ValueError(
                f"items not in {self.aspect.value} vocabulary: {sorted(unknown)}")


def score_knowledge(aspect: KnowledgeAspect, items) -> KnowledgeScore:
    """Score a coded item checklist on the 1..4 knowledge scale.

    During-indoor: 4 for drop/cover/hold under a table plus attention to
    falling objects, 3 for drop/cover/hold alone, 2 for any weaker cover
    or hazard awareness, 1 for nothing. After-indoor is count-based over
    the eleven-item checklist (9+ -> 4, 7-8 -> 3.5, 5-6 -> 3, 3-4 -> 2.5,
    1-2 -> 2, 0 -> 1). After-outdoor: 4 for open space away from
    buildings plus not returning until safe, 3 for the open space alone,
    2 for any weaker outdoor knowledge, 1 for nothing.
    """
    items = frozenset(items)
    unknown = items - set(aspect.vocabulary)
    if unknown:
        raise ValueError(f"items not in {aspect.value} vocabulary: {sorted(unknown)}")

    if aspect is KnowledgeAspect.DURING_INDOOR:
        dch = "dch_under_table" in items
        attention = "attention_falling" in items
        if dch and attention:
            score = 4.0
        elif dch:
            score = 3.0
        elif items:
            score = 2.0
        else:
            score = 1.0
    elif aspect is KnowledgeAspect.AFTER_INDOOR:
        k = len(items)
        if k >= 9:
            score = 4.0
        elif k >= 7:
            score = 3.5
        elif k >= 5:
            score = 3.0
        elif k >= 3:
            score = 2.5
        elif k >= 1:
            score = 2.0
        else:
            score = 1.0
    else:
        open_space = "open_space_away" in items
        no_return = "no_return_until_safe" in items
        if open_space and no_return:
            score = 4.0
        elif open_space:
            score = 3.0
        elif items:
            score = 2.0
        else:
            score = 1.0
    return KnowledgeScore(aspect, score)


def merge_coders(responses) -> frozenset[str]:
    """Merge exactly three coders' checklists by simple majority.

    An item makes the merged transcription when at least two of the
    three coders recorded it.
    """
    responses = list(responses)
    if len(responses) != 3:
        raise ValueError(f"expected exactly 3 coder responses, got {len(responses)}")
    keys = {(r.participant_id, r.phase, r.aspect) for r in responses}
    if len(keys) != 1:
        raise ValueError("responses mix participants, phases, or aspects")
    counts: dict[str, int] = {}
    for response in responses:
        for item in response.items:
            counts[item] = counts.get(item, 0) + 1
    return frozenset(item for item, n in counts.items() if n >= 2)
