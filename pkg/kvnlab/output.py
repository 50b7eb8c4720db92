from functools import cache
from rich.console import Console
from rich.style import Style
from rich.table import Table
import arrow, humanize


@cache
def get_console(*args, **kwargs):
    """Get a console object, with cache so that we reuse the same console object."""
    console = Console(*args, **kwargs)
    console.DEFAULT_SPINNER = "point"
    console.bot_style = Style(color="#30D5C8")
    console.error_style = Style(color="#FF0000")
    console.warning_style = Style(color="#FFA500")
    return console


def format_number(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, int) and not isinstance(value, bool):
        return humanize.intcomma(value)
    return str(value)


def summary_table(manifest):
    """Summary values of a run manifest as a two-column rich table."""
    table = Table(show_header=True, header_style="bold magenta", title=f"{manifest.mode} run")
    table.add_column("Quantity")
    table.add_column("Value", justify="right")
    for key, value in manifest.summary.items():
        table.add_row(key, format_number(value))
    return table


def files_table(manifest):
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("File")
    table.add_column("Kind")
    table.add_column("Size", justify="right")
    for entry in manifest.files:
        table.add_row(entry.path, entry.kind, humanize.naturalsize(entry.bytes))
    return table


def elapsed(manifest):
    """How long the run took, in words."""
    started, finished = arrow.get(manifest.started), arrow.get(manifest.finished)
    return humanize.precisedelta(finished - started, minimum_unit="milliseconds")


def print_warnings(console, warnings):
    for warning in warnings:
        console.print(f"⚠️  {warning}", style=console.warning_style)
