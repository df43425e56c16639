"""
hestonam CLI interface - Main entry point.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Optional

import pandas as pd
import rich_click as click
from rich.console import Console
from rich.panel import Panel

# Configure rich_click
click.rich_click.USE_RICH_MARKUP = True
click.rich_click.USE_MARKDOWN = False
click.rich_click.SHOW_ARGUMENTS = True
click.rich_click.GROUP_ARGUMENTS_OPTIONS = True
click.rich_click.STYLE_ERRORS_SUGGESTION = "magenta italic"
click.rich_click.ERRORS_SUGGESTION = ""
click.rich_click.MAX_WIDTH = 100

from .. import __version__
from ..config import load_config
from ..core.lsm import BoundaryCurve
from ..core.simulate import PATH_DUMP_MAX_CELLS, dump_paths_csv, paths_frame
from ..data.models import Measure, OutputFormat, RunConfig
from ..data.store import BoundaryStore
from ..exceptions import ConfigurationError, HestonAmError
from ..services.pipeline import (
    DEFAULT_MATURITIES,
    DEFAULT_SPOTS,
    DEFAULT_SWEEP,
    PricingPipeline,
    bench_frame,
    cloud_frame,
    run_benchmark,
    run_stability,
)
from .ui.progress import StageSpinner
from .ui.tables import bench_table, config_table, price_table, stability_table, store_table

# Messages, tables and the spinner go to stderr; primary output to stdout or --output
console = Console(stderr=True)

# Set up logging
logging.basicConfig(
    level=logging.WARNING,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)


class AppContext:
    """Application context for sharing state between commands."""

    def __init__(self):
        self.config: Optional[RunConfig] = None
        self.store: Optional[BoundaryStore] = None
        self.quiet: bool = False

    def init_app(self, config_path, seed, workers, output, fmt, store_path, quiet) -> None:
        """Load the configuration and open the boundary store."""
        self.quiet = quiet
        self.config = load_config(
            config_path,
            sim={"seed": seed, "workers": workers},
            output={"format": fmt, "path": output},
        )
        if store_path:
            self.store = BoundaryStore(Path(store_path))


pass_app = click.make_pass_decorator(AppContext, ensure=True)


def fail(error: HestonAmError) -> None:
    """Print a library error and exit with its status."""
    console.print(f"[bold red]Error: {error.user_message()}[/bold red]")
    sys.exit(error.exit_code)


def emit(text: str, path: Optional[Path]) -> None:
    """Write primary output to a file, or stdout when no path is set."""
    if path is None:
        click.echo(text, nl=not text.endswith("\n"))
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    console.print(f"[green]✓[/green] Wrote [cyan]{path}[/cyan]")


def show_warnings(warnings) -> None:
    for message in warnings:
        console.print(f"[yellow]warning:[/yellow] {message}")


def parse_floats(text: str, name: str) -> list[float]:
    if not text.strip():
        return []
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}", param_hint=name) from e


def parse_sweep(values) -> list[tuple[int, int]]:
    sweep = []
    for value in values:
        try:
            n_paths, n_steps = (int(part) for part in value.lower().split("x"))
        except ValueError as e:
            raise click.BadParameter(f"expected PATHSxSTEPS, got {value!r}", param_hint="--sweep") from e
        sweep.append((n_paths, n_steps))
    return sweep


# Define CLI group
@click.group()
@click.version_option(version=__version__, package_name="hestonam")
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='TOML or JSON run configuration')
@click.option('--seed', type=int, help='Override sim.seed')
@click.option('--workers', type=int, help='Override sim.workers')
@click.option('--output', '-o', type=click.Path(dir_okay=False), help='Write primary output here instead of stdout')
@click.option('--format', 'fmt', type=click.Choice(['csv', 'json']), help='Override output.format')
@click.option('--store', 'store_path', type=click.Path(dir_okay=False), help='Boundary cache (TinyDB file)')
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose logging')
@click.option('--quiet', '-q', is_flag=True, help='Hide the progress spinner')
@pass_app
def cli(app, config_path, seed, workers, output, fmt, store_path, verbose, quiet):
    """
    hestonam - American option pricing under the Heston model

    Fits the early-exercise boundary by least-squares Monte Carlo, prices
    the American call semi-analytically from it and compares the result
    with LSM and binomial-tree values.
    """
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        app.init_app(config_path, seed, workers, output, fmt, store_path, quiet)
    except HestonAmError as e:
        fail(e)


def run_stage(app: AppContext, description: str, fn, *args, **kwargs):
    """Run fn under the spinner, forwarding pipeline status lines to it."""
    with StageSpinner(description, console=console, enabled=not app.quiet) as spinner:
        return fn(*args, status_callback=spinner.update, **kwargs)


# === PRICE COMMAND ===
@cli.command("price")
@click.option('--boundary', 'boundary_file', type=click.Path(exists=True, dir_okay=False),
              help='Use a boundary JSON written by the boundary command')
@pass_app
def price_cmd(app, boundary_file):
    """Price the configured option."""
    config = app.config
    try:
        boundary = BoundaryCurve.from_json(Path(boundary_file).read_text()) if boundary_file else None

        def run(status_callback):
            pipeline = PricingPipeline(config, store=app.store, status_callback=status_callback)
            return pipeline.price(boundary)

        result = run_stage(app, f"Pricing {config.option.kind.value}", run)
    except HestonAmError as e:
        fail(e)
    except (ValueError, KeyError) as e:
        fail(ConfigurationError("Cannot price with these inputs", details=str(e)))

    console.print(Panel(price_table(result), title="[bold cyan]hestonam price[/bold cyan]"))
    show_warnings(result.diagnostics)

    payload = result.to_dict()
    if config.output.format == OutputFormat.CSV:
        row = dict(payload, warnings="; ".join(payload["warnings"]))
        text = pd.DataFrame([row]).to_csv(index=False, float_format="%.10g")
    else:
        text = json.dumps(payload, indent=2) + "\n"
    emit(text, config.output.path)


# === BENCHMARK COMMAND ===
@cli.command("benchmark")
@click.option('--maturities', default=",".join(f"{t:g}" for t in DEFAULT_MATURITIES),
              show_default=True, help='Comma-separated maturities')
@click.option('--spots', default=",".join(f"{s:g}" for s in DEFAULT_SPOTS),
              show_default=True, help='Comma-separated spot prices')
@click.option('--stability', is_flag=True, help='Also run the LSM stability sweep')
@click.option('--sweep', multiple=True, help='PATHSxSTEPS for the stability sweep (repeatable)')
@pass_app
def benchmark_cmd(app, maturities, spots, stability, sweep):
    """Compare LSM, semi-analytic and oracle prices over a (T, S) grid."""
    config = app.config
    maturity_grid = parse_floats(maturities, "--maturities")
    spot_grid = parse_floats(spots, "--spots")
    sweep_grid = parse_sweep(sweep) if sweep else list(DEFAULT_SWEEP)

    try:
        rows, warnings = run_stage(
            app, "Benchmarking", run_benchmark, config, maturity_grid, spot_grid, store=app.store
        )
        report = run_stability(config, sweep_grid) if stability else None
    except HestonAmError as e:
        fail(e)

    console.print(bench_table(rows, config.sim.n_paths, config.sim.n_steps))
    if report is not None:
        console.print(stability_table(report))
    show_warnings(warnings)

    frame = bench_frame(rows)
    if config.output.format == OutputFormat.CSV:
        text = frame.to_csv(index=False, float_format="%.10g")
    else:
        records = json.loads(frame.to_json(orient="records"))
        text = json.dumps({"rows": records, "warnings": warnings}, indent=2) + "\n"
    emit(text, config.output.path)


# === BOUNDARY COMMAND ===
@cli.command("boundary")
@click.option('--cloud', type=click.Path(dir_okay=False), help='Also write the critical-price point cloud as CSV')
@pass_app
def boundary_cmd(app, cloud):
    """Fit the early-exercise boundary and write it as JSON."""
    config = app.config
    try:
        def run(status_callback):
            return PricingPipeline(config, store=app.store, status_callback=status_callback).boundary()

        result = run_stage(app, "Fitting boundary", run)
    except HestonAmError as e:
        fail(e)

    console.print(
        f"[green]✓[/green] Boundary with {len(result.curve.taus)} knots, "
        f"LSM price {result.valuation.price:.6f} ± {result.valuation.stderr:.6f}"
    )
    if cloud:
        cloud_path = Path(cloud).expanduser()
        cloud_path.parent.mkdir(parents=True, exist_ok=True)
        cloud_frame(result.clouds).to_csv(cloud_path, index=False)
        console.print(f"[green]✓[/green] Wrote point cloud [cyan]{cloud_path}[/cyan]")

    emit(result.curve.to_json() + "\n", config.output.path)


# === SIMULATE COMMAND ===
@cli.command("simulate")
@click.option('--measure', type=click.Choice([m.value for m in Measure]), default=Measure.RISK_NEUTRAL.value,
              show_default=True, help='Drift convention of the paths')
@click.option('--max-cells', type=int, default=PATH_DUMP_MAX_CELLS, show_default=True,
              help='Refuse dumps with more path points than this')
@pass_app
def simulate_cmd(app, measure, max_cells):
    """Dump simulated paths as CSV (path, step, time, S, V)."""
    config = app.config
    cells = config.sim.n_paths * (config.sim.n_steps + 1)
    if cells > max_cells:
        fail(ConfigurationError(
            f"Path dump of {cells} points exceeds the limit of {max_cells}",
            details="Reduce sim.n_paths or sim.n_steps, or raise --max-cells",
        ))
    try:
        paths = run_stage(
            app, "Simulating",
            lambda status_callback: PricingPipeline(config, status_callback=status_callback).simulate(Measure(measure)),
        )
    except HestonAmError as e:
        fail(e)

    if config.output.path is None:
        emit(paths_frame(paths).to_csv(index=False, float_format="%.10g"), None)
    else:
        dump_paths_csv(paths, config.output.path, max_cells)
        console.print(f"[green]✓[/green] Wrote [cyan]{config.output.path}[/cyan]")


# === CACHE COMMANDS ===
@cli.group("cache")
def cache():
    """Inspect and prune the boundary store (--store, or ~/.hestonam/boundaries.json)."""


def open_store(app: AppContext) -> BoundaryStore:
    try:
        return app.store or BoundaryStore()
    except HestonAmError as e:
        fail(e)


@cache.command("list")
@pass_app
def cache_list(app):
    """List stored boundaries; their hashes also go to stdout."""
    store = open_store(app)
    try:
        entries = store.entries()
    except HestonAmError as e:
        fail(e)

    if not entries:
        console.print("[yellow]No stored boundaries. Fit one with 'hestonam --store PATH boundary'.[/yellow]")
        return
    console.print(store_table(entries))
    for entry in entries:
        click.echo(entry["params_hash"])


@cache.command("remove")
@click.argument("params_hash")
@pass_app
def cache_remove(app, params_hash):
    """Remove the boundary stored under PARAMS_HASH."""
    store = open_store(app)
    try:
        removed = store.remove(params_hash)
    except HestonAmError as e:
        fail(e)

    if not removed:
        fail(ConfigurationError(f"No stored boundary {params_hash}", details="See 'hestonam cache list'"))
    console.print(f"[green]✓[/green] Removed boundary [cyan]{params_hash}[/cyan]")


# === SHOW-CONFIG COMMAND ===
@cli.command("show-config")
@pass_app
def show_config(app):
    """Show the validated configuration with defaults filled in."""
    console.print(config_table(app.config))


if __name__ == '__main__':
    cli()
