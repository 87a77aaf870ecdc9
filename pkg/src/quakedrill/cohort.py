"""Cohort tables: paired pre/post comparisons per group and measure.

The input is a flat list of records, one per participant and measure,
with both the pre- and post-training value on the row (the paired
design). Analysis produces one row per (group, measure) plus an "all"
row pooling the groups, each carrying descriptives for both phases, a
Shapiro-Wilk normality note, and the Wilcoxon signed-rank comparison.

File format: comma-separated text with the exact header
``participant,group,measure,pre,post``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io
import json

from .stats import (
    Descriptives,
    ShapiroWilkResult,
    WilcoxonResult,
    descriptives,
    shapiro_wilk,
    wilcoxon_signed_rank,
)

GROUPS = ("staff", "visitor")
COHORT_HEADER = "participant,group,measure,pre,post"


class CohortDataError(Exception):
    """Malformed or unpaired cohort data; messages name rows and ids."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class CohortRecord:
    participant: str
    group: str
    measure: str
    pre: float
    post: float


@dataclass(frozen=True)
class CohortRow:
    group: str
    measure: str
    pre: Descriptives
    post: Descriptives
    shapiro_pre: ShapiroWilkResult | None
    shapiro_post: ShapiroWilkResult | None
    wilcoxon: WilcoxonResult | None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class CohortTable:
    rows: tuple[CohortRow, ...] = field(default_factory=tuple)


def cohort_analysis(records) -> CohortTable:
    """Build the comparison table over paired records.

    Rows come out grouped by measure (in first-appearance order), with
    one row per group in catalog order plus a pooled "all" row. Degenerate
    comparisons (identical pre/post, too few samples for normality) keep
    their descriptives and explain themselves in the row notes.
    """
    records = list(records)
    if not records:
        raise CohortDataError(["no records to analyze"])

    problems: list[str] = []
    group_of: dict[str, str] = {}
    seen_pairs: set[tuple[str, str]] = set()
    measures: list[str] = []
    for rec in records:
        if rec.group not in GROUPS:
            problems.append(f"participant {rec.participant}: unknown group {rec.group!r}")
        if rec.participant in group_of and group_of[rec.participant] != rec.group:
            problems.append(f"participant {rec.participant} appears in two groups")
        group_of[rec.participant] = rec.group
        key = (rec.participant, rec.measure)
        if key in seen_pairs:
            problems.append(
                f"participant {rec.participant} has duplicate rows for {rec.measure}")
        seen_pairs.add(key)
        if rec.measure not in measures:
            measures.append(rec.measure)
    if problems:
        raise CohortDataError(problems)

    rows: list[CohortRow] = []
    for measure in measures:
        of_measure = [r for r in records if r.measure == measure]
        present = [g for g in GROUPS if any(r.group == g for r in of_measure)]
        subsets = [(g, [r for r in of_measure if r.group == g]) for g in present]
        subsets.append(("all", of_measure))
        for group, subset in subsets:
            rows.append(_build_row(group, measure, subset))
    return CohortTable(tuple(rows))


def _build_row(group: str, measure: str, subset) -> CohortRow:
    pre_values = [r.pre for r in subset]
    post_values = [r.post for r in subset]
    notes: list[str] = []

    def normality(label: str, values) -> ShapiroWilkResult | None:
        try:
            result = shapiro_wilk(values)
        except ValueError as exc:
            notes.append(f"shapiro-wilk {label}: {exc}")
            return None
        kind = "non-normal" if result.p < 0.05 else "normal"
        notes.append(f"{label} {kind} (Shapiro-Wilk p = {format_p(result.p)})")
        return result

    sw_pre = normality("pre", pre_values)
    sw_post = normality("post", post_values)
    try:
        wilcoxon = wilcoxon_signed_rank(pre_values, post_values)
    except ValueError as exc:
        wilcoxon = None
        notes.append(f"wilcoxon: {exc}")
    return CohortRow(group, measure, descriptives(pre_values),
                     descriptives(post_values), sw_pre, sw_post,
                     wilcoxon, tuple(notes))


# --- formatting --------------------------------------------------------------

def format_p(p: float) -> str:
    return f"{p:.3f}"


def format_m_sd(d: Descriptives) -> str:
    if d.sd is None:
        return f"M = {d.mean:.2f}"
    return f"M = {d.mean:.2f} SD = {d.sd:.2f}"


def format_wilcoxon(w: WilcoxonResult | None) -> str:
    if w is None:
        return "-"
    return f"Z = {w.Z:.3f}, p = {format_p(w.p)}"


def render_cohort_table(table: CohortTable) -> str:
    """Aligned plain-text table in the M/SD/Z/p reporting style."""
    header = ("Measure", "Group", "n", "Pre-training", "Post-training",
              "Wilcoxon signed-rank")
    body = [
        (row.measure, row.group, str(row.pre.n), format_m_sd(row.pre),
         format_m_sd(row.post), format_wilcoxon(row.wilcoxon))
        for row in table.rows
    ]
    widths = [max(len(line[i]) for line in [header, *body])
              for i in range(len(header))]
    out = io.StringIO()

    def emit(cells):
        out.write("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
        out.write("\n")

    emit(header)
    emit(tuple("-" * w for w in widths))
    for row, cells in zip(table.rows, body):
        emit(cells)
        for note in row.notes:
            out.write(f"    note: {note}\n")
    return out.getvalue()


def _descriptives_dict(d: Descriptives) -> dict:
    return {"n": d.n, "mean": d.mean, "sd": d.sd, "min": d.min,
            "q1": d.q1, "median": d.median, "q3": d.q3, "max": d.max}


def cohort_table_to_dict(table: CohortTable) -> dict:
    rows = []
    for row in table.rows:
        wilcoxon = None
        if row.wilcoxon is not None:
            wilcoxon = {
                "n_effective": row.wilcoxon.n_effective,
                "W_plus": row.wilcoxon.W_plus,
                "W_minus": row.wilcoxon.W_minus,
                "Z": row.wilcoxon.Z,
                "p": row.wilcoxon.p,
                "exact": row.wilcoxon.exact,
            }
        rows.append({
            "group": row.group,
            "measure": row.measure,
            "pre": _descriptives_dict(row.pre),
            "post": _descriptives_dict(row.post),
            "wilcoxon": wilcoxon,
            "notes": list(row.notes),
        })
    return {"rows": rows}


def cohort_table_to_json(table: CohortTable) -> str:
    return json.dumps(cohort_table_to_dict(table), indent=2) + "\n"


# --- CSV I/O ------------------------------------------------------------------

def parse_cohort_csv(text: str) -> list[CohortRecord]:
    """Parse cohort CSV text, collecting every malformed row into one error."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != COHORT_HEADER:
        raise CohortDataError([f"header must be exactly {COHORT_HEADER!r}"])
    records: list[CohortRecord] = []
    problems: list[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 5:
            problems.append(f"row {lineno}: expected 5 fields, got {len(fields)}")
            continue
        participant, group, measure, pre_raw, post_raw = fields
        if group not in GROUPS:
            problems.append(f"row {lineno}: unknown group {group!r}")
            continue
        if not pre_raw or not post_raw:
            problems.append(
                f"row {lineno}: participant {participant} is missing a "
                f"{'pre' if not pre_raw else 'post'} value (unpaired)")
            continue
        try:
            pre, post = float(pre_raw), float(post_raw)
        except ValueError:
            problems.append(f"row {lineno}: pre/post must be numbers")
            continue
        records.append(CohortRecord(participant, group, measure, pre, post))
    if problems:
        raise CohortDataError(problems)
    if not records:
        raise CohortDataError(["file contains no data rows"])
    return records


def read_cohort_csv(path) -> list[CohortRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_cohort_csv(fh.read())


def render_cohort_csv(records) -> str:
    lines = [COHORT_HEADER]
    for r in records:
        lines.append(f"{r.participant},{r.group},{r.measure},{r.pre!r},{r.post!r}")
    return "\n".join(lines) + "\n"
