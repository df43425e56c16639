"""
Rich tables for hestonam output.
"""

from typing import Optional, Sequence

from rich import box
from rich.table import Table

from ...core.lsm import StabilityReport
from ...core.pricer import PriceResult
from ...data.models import RunConfig
from ...services.pipeline import BenchRow


def format_value(value: Optional[float], digits: int = 6) -> str:
    """Format an optional number for display."""
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def price_table(result: PriceResult, title: str = "Price") -> Table:
    """Decomposition of one price."""
    table = Table(title=title, box=box.ROUNDED, show_header=False)
    table.add_column("Component", style="cyan bold")
    table.add_column("Value", style="green", justify="right")

    table.add_row("European", format_value(result.european_part))
    table.add_row("Early-exercise premium", format_value(result.premium_part))
    table.add_row("Price", f"[bold]{format_value(result.price)}[/bold]")
    return table


def bench_table(rows: Sequence[BenchRow], n_paths: int, n_steps: int) -> Table:
    """LSM against semi-analytic and oracle prices per (T, S)."""
    table = Table(
        title=f"Benchmark ({n_paths / 1000:g}x1000 paths / {n_steps} steps)",
        box=box.ROUNDED,
    )
    table.add_column("T", style="cyan", justify="right")
    table.add_column("S", style="cyan", justify="right")
    table.add_column("LSM", style="green", justify="right")
    table.add_column("Std err", style="dim", justify="right")
    table.add_column("Semi-analytic", style="magenta", justify="right")
    table.add_column("Oracle", style="yellow", justify="right")
    table.add_column("|LSM - semi|", style="bold", justify="right")

    for row in rows:
        if row.error:
            table.add_row(f"{row.T:g}", f"{row.S:g}", f"[red]{row.error}[/red]", "", "", "", "")
            continue
        table.add_row(
            f"{row.T:g}",
            f"{row.S:g}",
            format_value(row.lsm_price),
            format_value(row.lsm_stderr),
            format_value(row.semi_analytic_price),
            format_value(row.oracle_price),
            format_value(row.abs_diff),
        )
    return table


def stability_table(report: StabilityReport) -> Table:
    """LSM prices across sample sizes."""
    table = Table(title="LSM stability (paths x1000 / steps)", box=box.ROUNDED)
    table.add_column("M/N", style="cyan")
    table.add_column("Price", style="green", justify="right")
    table.add_column("Std err", style="dim", justify="right")

    for entry in report.entries:
        table.add_row(entry.label, format_value(entry.price), format_value(entry.stderr))

    verdict = "[green]consistent[/green]" if report.consistent else "[red]inconsistent[/red]"
    table.caption = f"Pairwise agreement within 3 combined standard errors: {verdict}"
    return table


def config_table(config: RunConfig) -> Table:
    """Validated configuration with defaults filled in."""
    table = Table(title="Configuration", box=box.ROUNDED)
    table.add_column("Key", style="cyan bold")
    table.add_column("Value", style="green")

    data = config.model_dump(mode="json", by_alias=True)
    for section, values in data.items():
        for key, value in values.items():
            table.add_row(f"{section}.{key}", "-" if value is None else str(value))
    table.caption = f"params_hash {config.params_hash()}"
    return table


def store_table(entries: Sequence[dict]) -> Table:
    """Stored boundaries with their timestamps."""
    table = Table(title="Stored boundaries", box=box.ROUNDED)
    table.add_column("params_hash", style="cyan bold")
    table.add_column("Stored at", style="dim")
    table.add_column("Knots", style="green", justify="right")

    for entry in entries:
        table.add_row(entry["params_hash"], entry["stored_at"] or "-", str(entry["knots"]))
    return table
