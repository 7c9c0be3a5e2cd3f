"""Command-line entry point: ``tripweaver run | report | validate``.

Exit codes: 0 success, 1 invalid scenario or configuration, 2 I/O error.
"""

from __future__ import annotations

import dataclasses
import logging
import sys
from pathlib import Path
from typing import Optional

import click

from .domain import STAGES, ScenarioError
from .llm.client import LLMConfigError
from .metrics import emit_report, format_rate
from .runner import run_simulation
from .scenario import load_scenario

EXIT_INVALID = 1
EXIT_IO = 2


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(path: str):
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        _fail(EXIT_INVALID, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Multi-day household travel simulation on a small road network."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.option("--config", "config_path", required=True, help="Scenario JSON file.")
@click.option("--out", "out_dir", required=True, help="Directory that will hold the run directory.")
@click.option("--core", type=click.Choice(["oracle", "llm"]), default=None,
              help="Use this core for every stage, overriding the scenario.")
@click.option("--days", type=int, default=None, help="Override the number of simulated days.")
@click.option("--seed", type=int, default=None, help="Override the run seed.")
def run(config_path: str, out_dir: str, core: Optional[str], days: Optional[int], seed: Optional[int]) -> None:
    """Simulate a scenario and write logs, metrics and a report."""
    config = _load(config_path)
    changes: dict = {}
    if core is not None:
        changes["stage_cores"] = {s: core for s in STAGES}
    if days is not None:
        if days < 1:
            _fail(EXIT_INVALID, "--days must be >= 1")
        changes["days"] = days
    if seed is not None:
        changes["seed"] = seed
    config = dataclasses.replace(config, **changes)
    try:
        result = run_simulation(config, out_dir)
    except LLMConfigError as exc:
        _fail(EXIT_INVALID, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write run output: {exc}")
    m = result.metrics
    click.echo(f"run {result.run_id}: {config.days} days, {len(config.agents)} households")
    click.echo(f"declared {m.declared}, formatted {m.formatted}, missing rate {format_rate(m.missing_rate)}")
    click.echo(str(result.run_dir))


@main.command()
@click.argument("run_dir")
def report(run_dir: str) -> None:
    """Recompute metrics and report.md for an existing run directory."""
    path = Path(run_dir)
    if not (path / "config.json").is_file():
        _fail(EXIT_IO, f"{run_dir} is not a run directory (no config.json)")
    try:
        emit_report(path)
    except ScenarioError as exc:
        _fail(EXIT_INVALID, str(exc))
    except (OSError, ValueError, KeyError) as exc:
        _fail(EXIT_IO, f"cannot read run artifacts: {exc}")
    click.echo((path / "report.md").read_text(), nl=False)


@main.command()
@click.option("--config", "config_path", required=True, help="Scenario JSON file.")
def validate(config_path: str) -> None:
    """Check a scenario file without running it."""
    config = _load(config_path)
    click.echo(f"ok: {len(config.network.zones)} zones, {len(config.network.links)} links, "
               f"{len(config.agents)} households, {config.days} days")


if __name__ == "__main__":
    main()
