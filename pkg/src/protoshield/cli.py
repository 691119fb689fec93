#!/usr/bin/env python3
"""
protoshield CLI - privacy-preserving prototype federation simulator
"""

from pathlib import Path
from typing import List, Optional

import typer
from loguru import logger
from rich.console import Console
from rich.table import Table

from .app import create_app
from .config.run_config import load_config
from .core.domain.common import ProtoShieldError
from .core.ports.experiment_contracts import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

app = typer.Typer(
    name="protoshield",
    help="Simulate prototype-based personalized federated learning under local differential privacy",
    add_completion=False,
    rich_markup_mode="rich",
)
console = Console()
state = {"log_level": None}


def version_callback(value: bool):
    """バージョン情報を表示"""
    if value:
        from . import __version__

        console.print(f"protoshield version {__version__}")
        raise typer.Exit()


@app.callback()
def callback(
    version: bool = typer.Option(
        None,
        "--version",
        "-v",
        callback=version_callback,
        is_eager=True,
        help="バージョン情報を表示",
    ),
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="Overrides PROTOSHIELD_LOG_LEVEL (DEBUG, INFO, ...)"
    ),
):
    """
    protoshield - prototype federation with variance-adaptive perturbation

    設定ファイルからシナリオを実行し、成果物の比較表と自己診断を提供します。
    """
    state["log_level"] = log_level


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.4g}"


@app.command("run")
def run(
    config: Optional[Path] = typer.Option(
        None, "--config", "-c", help="TOML config file (defaults apply when omitted)"
    ),
    overrides: List[str] = typer.Option(
        [], "--set", "-s", help="Override a key: section.key=value (repeatable)"
    ),
    seed: Optional[int] = typer.Option(None, "--seed", help="Sets the top-level seed"),
    output: Optional[Path] = typer.Option(
        None, "--output", "-o", help="Scenario directory (sets output_dir)"
    ),
):
    """Run the configured scenario and write its artifacts."""
    try:
        extra = list(overrides)
        if seed is not None:
            extra.append(f"seed={seed}")
        run_config = load_config(config, extra)
        if output is not None:
            run_config = run_config.with_updates({"output_dir": str(output.resolve())})
    except ConfigError as e:
        console.print(f"[bold red]Config error[/bold red] {e}")
        raise typer.Exit(EXIT_CONFIG)

    container = create_app(log_level=state["log_level"])
    root = (
        Path(run_config.output_dir)
        if run_config.output_dir
        else Path(run_config.scenario.kind)
    )
    try:
        result = container.experiment_service().run(run_config, root)
    except ConfigError as e:
        console.print(f"[bold red]Config error[/bold red] {e}")
        raise typer.Exit(EXIT_CONFIG)
    except ProtoShieldError as e:
        console.print(f"[bold red]Run failed[/bold red] [{e.code}] {e}")
        raise typer.Exit(EXIT_RUNTIME)
    except Exception as e:
        logger.exception(f"An unexpected error occurred: {e}")
        console.print(f"[bold red]Run failed[/bold red] {e}")
        raise typer.Exit(EXIT_RUNTIME)

    table = Table(title=f"{result.kind} ({len(result.runs)} runs)")
    table.add_column("Run", style="cyan", no_wrap=True)
    table.add_column("AVG", justify="right", style="green")
    table.add_column("STD", justify="right", style="yellow")
    table.add_column("MIA AUC", justify="right", style="magenta")
    for r in result.runs:
        auc = r.summary.get("attack", {}).get("roc_auc", {}).get("mean")
        table.add_row(
            r.run_dir.name,
            _fmt(r.summary["accuracy"]["mean"]),
            _fmt(r.summary["accuracy"]["std"]),
            _fmt(auc),
        )
    console.print(table)
    console.print(f"Artifacts: {result.root}")


@app.command("report")
def report(
    dirs: List[Path] = typer.Argument(..., help="Artifact directories to aggregate"),
    output: Optional[Path] = typer.Option(
        None, "--output", "-o", help="Where to write the report CSVs (default: first dir)"
    ),
):
    """Aggregate run summaries into comparison tables."""
    container = create_app(log_level=state["log_level"])
    service = container.report_service()
    try:
        result = service.build(dirs)
        written = service.write(result, output or dirs[0])
    except ProtoShieldError as e:
        console.print(f"[bold red]Report failed[/bold red] [{e.code}] {e}")
        raise typer.Exit(EXIT_RUNTIME)

    table = Table(title=f"Accuracy ({result.runs} runs)")
    columns = [c for c in result.accuracy.columns]
    for column in columns:
        table.add_column(str(column), justify="right" if column not in ("method", "setting") else "left")
    for row in result.accuracy.itertuples(index=False):
        table.add_row(*[v if isinstance(v, str) else _fmt(v) for v in row])
    console.print(table)

    if result.attack is not None:
        attack = Table(title="Attacks")
        for column in ("method", "epsilon", "setting", "metric", "mean", "std"):
            attack.add_column(column)
        for row in result.attack.itertuples(index=False):
            attack.add_row(row.method, _fmt(row.epsilon), row.setting, row.metric, _fmt(row.mean), _fmt(row.std))
        console.print(attack)
    for path in written:
        console.print(f"Wrote {path}")


@app.command("selftest")
def selftest():
    """Run the executable privacy and numerics checks."""
    container = create_app(log_level=state["log_level"])
    results = container.selftest_service().run()

    table = Table(title="Self-test")
    table.add_column("Check", style="cyan")
    table.add_column("Result")
    table.add_column("Detail", style="white")
    table.add_column("Seconds", justify="right", style="blue")
    for check in results:
        status = "[green]pass[/green]" if check.passed else "[red]FAIL[/red]"
        table.add_row(check.name, status, check.detail, f"{check.seconds:.2f}")
    console.print(table)

    if not all(c.passed for c in results):
        raise typer.Exit(EXIT_RUNTIME)


def main():
    """メインエントリーポイント"""
    try:
        app()
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted by user[/yellow]")
        raise typer.Exit(130)


if __name__ == "__main__":
    main()
