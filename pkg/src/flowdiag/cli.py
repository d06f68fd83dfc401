import json
from pathlib import Path

import pandas as pd
import typer

from .acceptance import CHECKS, selftest as run_selftest
from .errors import ScenarioError
from .io import read_report
from .runner import run_scenario
from .scenario import Scenario, parse_scenario
from .sweep import sweep as run_sweep

EXIT_IO = 3
EXIT_VALIDATION = 4

app = typer.Typer(help="Flow equations and one-step CUT diagonalization, compared against closed forms.")


def _load(path: Path) -> Scenario:
    print(f"Loading scenario from: {path}")
    try:
        text = path.read_bytes()
    except OSError as e:
        print(f"I/O Error: {e}")
        raise typer.Exit(EXIT_IO)
    try:
        return parse_scenario(text)
    except ScenarioError as e:
        print(f"Validation Error: {e}")
        raise typer.Exit(EXIT_VALIDATION)


@app.command()
def run(scenario: Path = typer.Argument(..., help="Scenario JSON file")):
    """Run one scenario and compare each method with its closed form."""
    s = _load(scenario)
    try:
        report = run_scenario(s)
    except ScenarioError as e:
        print(f"Validation Error: {e}")
        raise typer.Exit(EXIT_VALIDATION)
    except OSError as e:
        print(f"I/O Error: {e}")
        raise typer.Exit(EXIT_IO)
    raise typer.Exit(report.exit_status)


@app.command()
def sweep(
    scenario: Path = typer.Argument(..., help="Scenario JSON file with array-valued parameters"),
    jobs: int = typer.Option(None, "--jobs", "-j", help="Parallel workers (default: FLOWDIAG_THREADS or 1)"),
):
    """Evaluate the Cartesian product of the array-valued parameters."""
    s = _load(scenario)
    try:
        report = run_sweep(s, n_jobs=jobs)
    except ScenarioError as e:
        print(f"Validation Error: {e}")
        raise typer.Exit(EXIT_VALIDATION)
    except OSError as e:
        print(f"I/O Error: {e}")
        raise typer.Exit(EXIT_IO)
    raise typer.Exit(report.exit_status)


@app.command()
def selftest(
    check: list[str] = typer.Option(None, "--check", help=f"Run only these checks: {', '.join(CHECKS)}"),
):
    """Run the acceptance suite and print a pass/fail table."""
    unknown = [c for c in check or [] if c not in CHECKS]
    if unknown:
        print(f"Validation Error: unknown check '{unknown[0]}'. Choose from {list(CHECKS)}")
        raise typer.Exit(EXIT_VALIDATION)
    table = run_selftest(check or None)
    with pd.option_context("display.max_colwidth", None, "display.width", 200):
        print(table.to_string(index=False))
    failed = int((~table["passed"]).sum())
    print(f"\n{len(table) - failed}/{len(table)} checks passed")
    raise typer.Exit(1 if failed else 0)


@app.command()
def show_report(report: Path = typer.Argument(..., help="Report JSON written by run or sweep")):
    """Display a stored comparison report."""
    try:
        data = read_report(report)
    except OSError as e:
        print(f"I/O Error: {e}")
        raise typer.Exit(EXIT_IO)
    except json.JSONDecodeError as e:
        print(f"Validation Error: {report} is not valid JSON ({e})")
        raise typer.Exit(EXIT_VALIDATION)

    print(json.dumps(data, indent=2))


if __name__ == "__main__":
    app()
