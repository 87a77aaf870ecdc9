"""Parser and renderer for the ``.drill`` scenario file format.

The format is a line-oriented block grammar with whitespace-separated
tokens:

    scenario STRING
    behavior ID <phase> STRING
    waypoint ID at ( NUM , NUM , NUM ) [label STRING]
    route ID -> ID
    start ID
    node ID at ID {
      prompt STRING
      [timeout DURATION -> EVENTKIND STRING (goto ID | end)]
      option ID STRING (recommended [behavior ID] | not_recommended)
        rationale STRING (goto ID | end)
      ...
    }

``#`` starts a comment running to the end of the line. Strings are
double-quoted; ``\\"`` and ``\\\\`` are the only escapes (any other
backslash passes through verbatim). Durations take an ``s`` or ``ms``
suffix and are stored as whole milliseconds. Rendering always emits LF
line endings, and ``parse(render(s))`` reproduces ``s`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
import re

from .model import (
    ActionOption,
    Behavior,
    DecisionNode,
    Phase,
    Route,
    Scenario,
    TimeoutRule,
    Waypoint,
)

_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*")
_PUNCT = "(){},"

_PHASES = {p.value: p for p in Phase}


class ParseError(Exception):
    """Syntax or consistency error with a precise source location."""

    def __init__(self, line: int, column: int, expected: str, found: str):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        super().__init__(f"{line}:{column}: expected {expected}, found {found}")


@dataclass(frozen=True)
class _Token:
    kind: str  # word | string | number | duration | punct | arrow | eof
    value: object
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        if self.kind == "string":
            return "string"
        return repr(str(self.value))


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(source)

    def advance_over(text: str) -> None:
        nonlocal line, col
        for ch in text:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            advance_over(ch)
            i += 1
            continue
        if ch == "#":
            end = source.find("\n", i)
            end = n if end == -1 else end
            advance_over(source[i:end])
            i = end
            continue

        tok_line, tok_col = line, col
        if ch == '"':
            j = i + 1
            parts: list[str] = []
            while j < n:
                c = source[j]
                if c == "\\" and j + 1 < n and source[j + 1] in ('"', "\\"):
                    parts.append(source[j + 1])
                    j += 2
                    continue
                if c == '"':
                    break
                parts.append(c)
                j += 1
            if j >= n:
                raise ParseError(tok_line, tok_col, "closing '\"'", "end of input")
            raw = source[i : j + 1]
            advance_over(raw)
            i = j + 1
            tokens.append(_Token("string", "".join(parts), tok_line, tok_col))
            continue
        if ch in _PUNCT:
            tokens.append(_Token("punct", ch, tok_line, tok_col))
            advance_over(ch)
            i += 1
            continue
        if ch == "-" and i + 1 < n and source[i + 1] == ">":
            tokens.append(_Token("arrow", "->", tok_line, tok_col))
            advance_over("->")
            i += 2
            continue

        m = _NUMBER_RE.match(source, i)
        if m and (ch.isdigit() or ch in "+-."):
            text = m.group(0)
            j = m.end()
            suffix = ""
            while j < n and source[j].isalpha():
                suffix += source[j]
                j += 1
            if suffix in ("s", "ms"):
                value = float(text) * (1000 if suffix == "s" else 1)
                if abs(value - round(value)) > 1e-6:
                    raise ParseError(tok_line, tok_col, "a whole number of milliseconds",
                                     repr(text + suffix))
                tokens.append(_Token("duration", int(round(value)), tok_line, tok_col))
            elif suffix:
                raise ParseError(tok_line, tok_col, "duration suffix 's' or 'ms'",
                                 repr(text + suffix))
            else:
                tokens.append(_Token("number", float(text), tok_line, tok_col))
            advance_over(source[i:j])
            i = j
            continue

        m = _WORD_RE.match(source, i)
        if m:
            text = m.group(0)
            tokens.append(_Token("word", text, tok_line, tok_col))
            advance_over(text)
            i = m.end()
            continue

        raise ParseError(tok_line, tok_col, "a token", repr(ch))

    # Pin end-of-input errors to the last real line of the source.
    if col == 1 and line > 1:
        lines = source.split("\n")
        line -= 1
        col = len(lines[line - 1]) + 1
    tokens.append(_Token("eof", None, line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, expected: str, tok: _Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(tok.line, tok.column, expected, tok.describe())

    def expect_word(self, word: str) -> _Token:
        tok = self.next()
        if tok.kind != "word" or tok.value != word:
            raise self.fail(repr(word), tok)
        return tok

    def expect_kind(self, kind: str, what: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise self.fail(what, tok)
        return tok

    def expect_id(self, what: str = "an identifier") -> _Token:
        return self.expect_kind("word", what)

    def expect_punct(self, ch: str) -> _Token:
        tok = self.next()
        if tok.kind != "punct" or tok.value != ch:
            raise self.fail(repr(ch), tok)
        return tok


def parse_scenario(source: str) -> Scenario:
    """Parse ``.drill`` source into a :class:`Scenario`.

    Raises :class:`ParseError` at the first syntax violation, unknown
    keyword, duplicate declaration, or malformed number/duration. The
    result is not validated beyond syntax; run
    :func:`~quakedrill.model.validate_scenario` for graph checks.
    """
    p = _Parser(_tokenize(source))
    p.expect_word("scenario")
    title = p.expect_kind("string", "scenario title string")

    behaviors: list[Behavior] = []
    waypoints: list[Waypoint] = []
    routes: list[Route] = []
    nodes: list[DecisionNode] = []
    start: str | None = None
    seen_behaviors: set[str] = set()
    seen_waypoints: set[str] = set()
    seen_nodes: set[str] = set()

    while p.peek().kind != "eof":
        tok = p.peek()
        if tok.kind != "word":
            raise p.fail("a declaration keyword")
        keyword = tok.value

        if keyword == "behavior":
            p.next()
            tag = p.expect_id("behavior tag")
            if tag.value in seen_behaviors:
                raise ParseError(tag.line, tag.column, "an undeclared behavior tag",
                                 f"duplicate {tag.value!r}")
            seen_behaviors.add(tag.value)
            phase_tok = p.expect_id("a phase name")
            if phase_tok.value not in _PHASES:
                raise p.fail("one of " + ", ".join(sorted(_PHASES)), phase_tok)
            desc = p.expect_kind("string", "behavior description string")
            behaviors.append(Behavior(tag.value, _PHASES[phase_tok.value], desc.value))
        elif keyword == "waypoint":
            p.next()
            wid = p.expect_id("waypoint id")
            if wid.value in seen_waypoints:
                raise ParseError(wid.line, wid.column, "an undeclared waypoint id",
                                 f"duplicate {wid.value!r}")
            seen_waypoints.add(wid.value)
            p.expect_word("at")
            p.expect_punct("(")
            coords = []
            for k in range(3):
                coords.append(p.expect_kind("number", "a coordinate").value)
                if k < 2:
                    p.expect_punct(",")
            p.expect_punct(")")
            label = ""
            if p.peek().kind == "word" and p.peek().value == "label":
                p.next()
                label = p.expect_kind("string", "waypoint label string").value
            waypoints.append(Waypoint(wid.value, tuple(coords), label))
        elif keyword == "route":
            p.next()
            origin = p.expect_id("route origin waypoint")
            p.expect_kind("arrow", "'->'")
            dest = p.expect_id("route destination waypoint")
            routes.append(Route(origin.value, dest.value))
        elif keyword == "start":
            tok = p.next()
            if start is not None:
                raise ParseError(tok.line, tok.column, "a single start declaration",
                                 "duplicate 'start'")
            start = p.expect_id("start node id").value
        elif keyword == "node":
            nodes.append(_parse_node(p, seen_nodes))
        else:
            raise p.fail("'behavior', 'waypoint', 'route', 'start' or 'node'")

    eof = p.peek()
    if start is None:
        raise ParseError(eof.line, eof.column, "a 'start' declaration", "end of input")
    if not nodes:
        raise ParseError(eof.line, eof.column, "at least one node", "end of input")

    return Scenario(
        id=title.value,
        title=title.value,
        behaviors=tuple(behaviors),
        waypoints=tuple(waypoints),
        routes=tuple(routes),
        nodes=tuple(nodes),
        start_node=start,
    )


def _parse_target(p: _Parser) -> str | None:
    tok = p.next()
    if tok.kind == "word" and tok.value == "end":
        return None
    if tok.kind == "word" and tok.value == "goto":
        return p.expect_id("target node id").value
    raise p.fail("'goto <node>' or 'end'", tok)


def _parse_node(p: _Parser, seen_nodes: set[str]) -> DecisionNode:
    p.expect_word("node")
    nid = p.expect_id("node id")
    if nid.value in seen_nodes:
        raise ParseError(nid.line, nid.column, "an undeclared node id",
                         f"duplicate {nid.value!r}")
    seen_nodes.add(nid.value)
    p.expect_word("at")
    waypoint = p.expect_id("waypoint id")
    p.expect_punct("{")
    p.expect_word("prompt")
    prompt = p.expect_kind("string", "prompt string")

    timeout: TimeoutRule | None = None
    if p.peek().kind == "word" and p.peek().value == "timeout":
        p.next()
        duration = p.expect_kind("duration", "a duration like '10s' or '500ms'")
        p.expect_kind("arrow", "'->'")
        event_kind = p.expect_id("an event kind")
        outcome = p.expect_kind("string", "timeout outcome string")
        timeout = TimeoutRule(duration.value, event_kind.value, outcome.value,
                              _parse_target(p))

    options: list[ActionOption] = []
    seen_options: set[str] = set()
    while p.peek().kind == "word" and p.peek().value == "option":
        p.next()
        oid = p.expect_id("option id")
        if oid.value in seen_options:
            raise ParseError(oid.line, oid.column, "an undeclared option id",
                             f"duplicate {oid.value!r}")
        seen_options.add(oid.value)
        label = p.expect_kind("string", "option label string")
        flag = p.expect_id("'recommended' or 'not_recommended'")
        behavior_tag: str | None = None
        if flag.value == "recommended":
            recommended = True
            if p.peek().kind == "word" and p.peek().value == "behavior":
                p.next()
                behavior_tag = p.expect_id("behavior tag").value
        elif flag.value == "not_recommended":
            recommended = False
        else:
            raise p.fail("'recommended' or 'not_recommended'", flag)
        p.expect_word("rationale")
        rationale = p.expect_kind("string", "rationale string")
        options.append(ActionOption(oid.value, label.value, recommended,
                                    rationale.value, _parse_target(p), behavior_tag))

    if not options:
        raise p.fail("at least one 'option'")
    p.expect_punct("}")
    return DecisionNode(nid.value, waypoint.value, prompt.value, tuple(options), timeout)


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _duration(ms: int) -> str:
    if ms % 1000 == 0:
        return f"{ms // 1000}s"
    return f"{ms}ms"


def _target(node_id: str | None) -> str:
    return "end" if node_id is None else f"goto {node_id}"


def render_scenario(scenario: Scenario) -> str:
    """Serialize a scenario to canonical ``.drill`` text (UTF-8, LF).

    The output reparses to a scenario structurally equal to the input.
    """
    out: list[str] = [f"scenario {_quote(scenario.title)}", ""]
    for b in scenario.behaviors:
        out.append(f"behavior {b.tag} {b.phase.value} {_quote(b.description)}")
    if scenario.behaviors:
        out.append("")
    for wp in scenario.waypoints:
        coords = ", ".join(repr(c) for c in wp.position)
        line = f"waypoint {wp.id} at ({coords})"
        if wp.label:
            line += f" label {_quote(wp.label)}"
        out.append(line)
    for r in scenario.routes:
        out.append(f"route {r.origin} -> {r.dest}")
    out.append(f"start {scenario.start_node}")
    for node in scenario.nodes:
        out.append("")
        out.append(f"node {node.id} at {node.waypoint} {{")
        out.append(f"  prompt {_quote(node.prompt)}")
        if node.timeout is not None:
            t = node.timeout
            out.append(f"  timeout {_duration(t.after_ms)} -> {t.outcome_event} "
                       f"{_quote(t.outcome_text)} {_target(t.next_node)}")
        for opt in node.options:
            flag = "recommended" if opt.recommended else "not_recommended"
            if opt.recommended and opt.behavior_tag is not None:
                flag += f" behavior {opt.behavior_tag}"
            out.append(f"  option {opt.id} {_quote(opt.label)} {flag}")
            out.append(f"    rationale {_quote(opt.rationale)} {_target(opt.next_node)}")
        out.append("}")
    return "\n".join(out) + "\n"
