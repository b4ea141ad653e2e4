"""Command-line interface.

Stage subcommands run the pipeline up to and including their stage with
resume semantics (already-computed stages with unchanged inputs are
skipped); ``report`` renders tables and figures from a complete store;
``check`` validates referential integrity.

Exit codes: 0 success, 2 config error, 3 stage failure, 4 integrity failure.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import ConfigError, PtmTraceError, ReportPrereqError, StageError
from .pipeline import RunConfig, run_pipeline
from .report import emit_report
from .store import RunStore

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_INTEGRITY = 4


def _load_config(config_path: str, out: str | None, jobs: int | None) -> RunConfig:
    cfg = RunConfig.from_json(config_path)
    if out:
        cfg.out = out
    if jobs:
        cfg.jobs = jobs
    return cfg


def _run_through(stage: str, config: str, out: str | None, jobs: int | None, force: bool) -> None:
    try:
        cfg = _load_config(config, out, jobs)
        result = run_pipeline(cfg, through=stage, force=force)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except StageError as exc:
        click.echo(f"stage failure: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    except PtmTraceError as exc:
        click.echo(f"stage failure: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    for name in result.executed:
        click.echo(f"executed {name}")
    for name in result.skipped:
        click.echo(f"skipped {name} (inputs unchanged)")


def _stage_command(stage: str, help_text: str):
    @click.command(name=stage, help=help_text)
    @click.option("--config", "-c", required=True, type=click.Path(exists=True))
    @click.option("--out", type=click.Path(), default=None, help="Override output directory.")
    @click.option("--jobs", type=int, default=None, help="Within-stage parallelism.")
    @click.option("--force", is_flag=True, help="Re-run even when inputs are unchanged.")
    def command(config: str, out: str | None, jobs: int | None, force: bool):
        _run_through(stage, config, out, jobs, force)

    return command


@click.group()
def main():
    """Detect PTM and library dependency changes across release histories."""


main.add_command(_stage_command("catalog", "Load and validate the signature catalog and PTM index."))
main.add_command(_stage_command("lines", "Reconstruct and filter release lines."))
main.add_command(_stage_command("snapshot", "Extract per-release PTM snapshots."))
main.add_command(_stage_command("diff", "Compute PTM change events between release pairs."))
main.add_command(_stage_command("baseline", "Detect library dependency changes from manifests."))
main.add_command(_stage_command("harvest", "Collect documentation artifacts for change events."))
main.add_command(_stage_command("metrics", "Compute evolution and documentation metrics."))
main.add_command(_stage_command("stats", "Run the PTM-vs-library statistical comparisons."))


@main.command(help="Emit comparison reports (JSON + CSV tables and figures).")
@click.option("--config", "-c", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="Override store directory.")
@click.option("--report-dir", type=click.Path(), default=None, help="Report output directory.")
@click.option("--format", "formats", multiple=True, type=click.Choice(["json", "csv"]),
              help="Restrict output formats (default: both).")
@click.option("--no-figures", is_flag=True, help="Skip figure rendering.")
def report(config, out, report_dir, formats, no_figures):
    try:
        cfg = _load_config(config, out, None)
        store = RunStore(cfg.out)
        written = emit_report(
            store,
            out_dir=report_dir,
            formats=tuple(formats) or ("json", "csv"),
            figures=not no_figures,
        )
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except ReportPrereqError as exc:
        click.echo(f"report prerequisites missing: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    for path in written:
        click.echo(f"wrote {path}")


@main.command(help="Validate referential integrity of the run store.")
@click.option("--config", "-c", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="Override store directory.")
def check(config, out):
    try:
        cfg = _load_config(config, out, None)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    store = RunStore(cfg.out)
    problems = store.check()
    if problems:
        for problem in problems:
            click.echo(problem, err=True)
        sys.exit(EXIT_INTEGRITY)
    click.echo("store integrity ok")


if __name__ == "__main__":
    main()
