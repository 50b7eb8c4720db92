from datetime import timedelta
from kvnlab.acceptance import run_checks
from kvnlab.helpers import default_threads
from kvnlab.output import get_console
from rich.table import Table
import click, humanize, sys


@click.command()
@click.option("--quick", is_flag=True, help="Skip the long-running checks")
@click.option("-t", "--threads", type=int, default=default_threads, show_default="KVNLAB_THREADS or 1")
def selftest(quick, threads):
    """Run the built-in acceptance checks."""
    console = get_console()
    with console.status("Running checks", spinner=console.DEFAULT_SPINNER):
        results = run_checks(quick=quick, threads=threads)

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Check")
    table.add_column("Result")
    table.add_column("Measured", justify="right")
    table.add_column("Bound", justify="right")
    table.add_column("Time", justify="right")
    for result in results:
        verdict = "[green]PASS[/green]" if result.passed else "[red]FAIL[/red]"
        seconds = humanize.precisedelta(timedelta(seconds=result.seconds), minimum_unit="milliseconds")
        table.add_row(result.name, verdict, f"{result.measured:.3g}", f"{result.tolerance:.3g}", seconds)
    console.print(table)

    failed = [result for result in results if not result.passed]
    for result in failed:
        if result.detail:
            console.print(f"{result.name}: {result.detail}", style=console.error_style, highlight=False)
    if failed:
        console.print(f"🛑 {len(failed)} of {len(results)} checks failed", style=console.error_style)
        sys.exit(1)
    console.print(f"✅ All {len(results)} checks passed", style=console.bot_style)
