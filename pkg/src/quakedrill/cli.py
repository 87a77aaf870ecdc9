"""Command line interface: validate, run, simulate-cohort, analyze, serve.

Exit codes follow one convention everywhere: 0 success, 1 domain error
(bad scenario, failed validation, malformed data), 2 environment error
(unreadable file, busy port, missing directory).
"""

from __future__ import annotations

from pathlib import Path
import socket
import sys

import click

from . import __version__
from .agents import AgentScriptError, run_optimal, run_random, run_script, run_worst
from .assessment import build_report, report_to_json
from .cohort import (
    CohortDataError,
    cohort_analysis,
    cohort_table_to_json,
    read_cohort_csv,
    render_cohort_csv,
    render_cohort_table,
)
from .dsl import ParseError, parse_scenario
from .model import validate_scenario
from .runtime import serialize_log
from .simulate import ImprovementProfile, simulate_cohort

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_ENV = 2


def _read_scenario_file(path: Path):
    try:
        source = path.read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc.strerror}", err=True)
        sys.exit(EXIT_ENV)
    try:
        return parse_scenario(source)
    except ParseError as exc:
        click.echo(f"{path}:{exc.line}:{exc.column}: "
                   f"expected {exc.expected}, found {exc.found}", err=True)
        sys.exit(EXIT_DOMAIN)


def _load_valid_scenario(path: Path):
    scenario = _read_scenario_file(path)
    report = validate_scenario(scenario)
    if report.errors:
        for issue in report.errors:
            click.echo(f"error [{issue.code}] at {issue.location}: {issue.message}",
                       err=True)
        sys.exit(EXIT_DOMAIN)
    return scenario


@click.group()
@click.version_option(__version__)
@click.option("--data-dir", type=click.Path(path_type=Path), default=Path("data"),
              show_default=True, help="Directory for logs, reports and stored data.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for anything randomized.")
@click.pass_context
def main(ctx: click.Context, data_dir: Path, seed: int):
    """Author, run, and analyze earthquake evacuation drills."""
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = data_dir
    ctx.obj["seed"] = seed


@main.command()
@click.argument("scenario_file", type=click.Path(path_type=Path))
def validate(scenario_file: Path):
    """Parse and validate a scenario file; exit 0 only if clean."""
    scenario = _read_scenario_file(scenario_file)
    report = validate_scenario(scenario)
    for issue in report.errors:
        click.echo(f"error [{issue.code}] at {issue.location}: {issue.message}")
    for issue in report.warnings:
        click.echo(f"warning [{issue.code}] at {issue.location}: {issue.message}")
    click.echo(f"scenario: {scenario.id}")
    click.echo(f"nodes: {len(scenario.nodes)}  behaviors: {len(scenario.behaviors)}")
    click.echo("coverage:")
    for tag, nodes in report.coverage.items():
        where = ", ".join(nodes) if nodes else "(never offered)"
        click.echo(f"  {tag}: {where}")
    if report.errors:
        click.echo(f"{len(report.errors)} error(s)")
        sys.exit(EXIT_DOMAIN)
    click.echo("ok")


@main.command()
@click.argument("scenario_file", type=click.Path(path_type=Path))
@click.option("--agent", type=click.Choice(["optimal", "worst", "random", "script"]),
              default="optimal", show_default=True)
@click.option("--script-file", type=click.Path(path_type=Path),
              help="Option ids, whitespace-separated, for --agent script.")
@click.option("--stall", type=float, default=0.0, show_default=True,
              help="Probability the random agent waits out a node's timeout.")
@click.option("--participant", default=None, help="Participant id for the log.")
@click.option("--out-log", type=click.Path(path_type=Path), default=None)
@click.option("--out-report", type=click.Path(path_type=Path), default=None)
@click.pass_context
def run(ctx, scenario_file: Path, agent: str, script_file: Path | None,
        stall: float, participant: str | None,
        out_log: Path | None, out_report: Path | None):
    """Play a scenario with a scripted agent; write event log and report."""
    scenario = _load_valid_scenario(scenario_file)
    seed = ctx.obj["seed"]
    try:
        if agent == "optimal":
            state = run_optimal(scenario, participant or "agent-optimal")
        elif agent == "worst":
            state = run_worst(scenario, participant or "agent-worst")
        elif agent == "random":
            state = run_random(scenario, seed, stall=stall,
                               participant_id=participant)
        else:
            if script_file is None:
                click.echo("error: --agent script requires --script-file", err=True)
                sys.exit(EXIT_DOMAIN)
            try:
                tokens = script_file.read_text(encoding="utf-8").split()
            except OSError as exc:
                click.echo(f"error: cannot read {script_file}: {exc.strerror}", err=True)
                sys.exit(EXIT_ENV)
            state = run_script(scenario, tokens, participant or "agent-script")
    except AgentScriptError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)

    data_dir: Path = ctx.obj["data_dir"]
    out_log = out_log or data_dir / f"{scenario_file.stem}-{agent}.log"
    out_report = out_report or data_dir / f"{scenario_file.stem}-{agent}.report.json"
    out_log.parent.mkdir(parents=True, exist_ok=True)
    out_report.parent.mkdir(parents=True, exist_ok=True)
    out_log.write_text(serialize_log(state.log), encoding="utf-8")
    report = build_report(state.log, scenario)
    out_report.write_text(report_to_json(report), encoding="utf-8")

    summary = report.score_summary
    click.echo(f"finished in {state.elapsed_ms} ms, {len(report.playback)} choices")
    click.echo("  " + "  ".join(f"{k}={v}" for k, v in summary.items()))
    click.echo(f"log: {out_log}")
    click.echo(f"report: {out_report}")


@main.command("simulate-cohort")
@click.option("--staff", type=int, default=25, show_default=True)
@click.option("--visitors", type=int, default=62, show_default=True)
@click.option("--knowledge-gain", type=float, default=ImprovementProfile.knowledge_gain,
              show_default=True, help="Latent knowledge shift from pre to post.")
@click.option("--efficacy-gain", type=float, default=ImprovementProfile.efficacy_gain,
              show_default=True, help="Latent self-efficacy shift from pre to post.")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_context
def simulate_cohort_cmd(ctx, staff: int, visitors: int, knowledge_gain: float,
                        efficacy_gain: float, out: Path | None):
    """Generate a synthetic paired pre/post cohort CSV."""
    profile = ImprovementProfile(knowledge_gain=knowledge_gain,
                                 efficacy_gain=efficacy_gain)
    try:
        records = simulate_cohort(staff, visitors, ctx.obj["seed"], profile)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DOMAIN)
    out = out or ctx.obj["data_dir"] / "cohort.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_cohort_csv(records), encoding="utf-8")
    click.echo(f"wrote {len(records)} records for {staff} staff + {visitors} visitors "
               f"to {out}")


@main.command()
@click.argument("cohort_file", type=click.Path(path_type=Path))
@click.option("--group", type=click.Choice(["staff", "visitor"]), default=None)
@click.option("--measure", default=None)
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of text.")
def analyze(cohort_file: Path, group: str | None, measure: str | None, as_json: bool):
    """Run the pre/post comparison table over a cohort CSV."""
    try:
        records = read_cohort_csv(cohort_file)
    except OSError as exc:
        click.echo(f"error: cannot read {cohort_file}: {exc.strerror}", err=True)
        sys.exit(EXIT_ENV)
    except CohortDataError as exc:
        for problem in exc.problems:
            click.echo(f"error: {problem}", err=True)
        sys.exit(EXIT_DOMAIN)
    if group:
        records = [r for r in records if r.group == group]
    if measure:
        records = [r for r in records if r.measure == measure]
    try:
        table = cohort_analysis(records)
    except CohortDataError as exc:
        for problem in exc.problems:
            click.echo(f"error: {problem}", err=True)
        sys.exit(EXIT_DOMAIN)
    click.echo(cohort_table_to_json(table) if as_json else render_cohort_table(table),
               nl=False)


@main.command()
@click.option("--host", envvar="QUAKEDRILL_HOST", default="127.0.0.1", show_default=True)
@click.option("--port", envvar="QUAKEDRILL_PORT", type=int, default=8077,
              show_default=True)
@click.option("--scenario-dir", envvar="QUAKEDRILL_SCENARIOS",
              type=click.Path(path_type=Path), default=None,
              help="Directory of .drill files; defaults to the bundled scenarios.")
@click.pass_context
def serve(ctx, host: str, port: int, scenario_dir: Path | None):
    """Run the HTTP service until terminated."""
    import uvicorn

    from .service import create_app

    if scenario_dir is None:
        scenario_dir = Path(__file__).parent / "scenarios"
    data_dir = ctx.obj["data_dir"]
    try:
        app = create_app(scenario_dir, data_dir, sweep_interval=0.25)
    except (FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ENV)

    # Probe the port up front so a busy address is a clean exit 2 instead
    # of a stack trace out of the server loop.
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
        probe.close()
    except OSError as exc:
        click.echo(f"error: cannot listen on {host}:{port}: {exc.strerror}", err=True)
        sys.exit(EXIT_ENV)

    click.echo(f"serving on http://{host}:{port} "
               f"(scenarios: {scenario_dir}, data: {data_dir})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
