from kvnlab.diagnostics import DEFAULT_PHASE_FLOOR
from kvnlab.output import get_console, print_warnings
from kvnlab.plotdata import SELECTORS, PlotSelectorError, emit_plot_data
from kvnlab.scenario import read_manifest
import click, sys


@click.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("-w", "--what", required=True, help=f"One of: {', '.join(SELECTORS)}")
@click.option("-o", "--out", "out_dir", type=click.Path(file_okay=False), help="Defaults to <run dir>/plots")
@click.option("--phase-floor", type=float, default=DEFAULT_PHASE_FLOOR, show_default=True)
def plot(manifest, what, out_dir, phase_floor):
    """Write gnuplot-ready data files for a finished run."""
    console = get_console()
    try:
        before = set(read_manifest(manifest).warnings)
        written = emit_plot_data(manifest, what, out_dir, phase_floor)
    except PlotSelectorError as e:
        console.print(f"🛑 {e}", style=console.error_style, highlight=False)
        sys.exit(1)
    except (ArithmeticError, OSError, ValueError) as e:
        console.print(f"🛑 Plot data failed: {e}", style=console.error_style, highlight=False)
        sys.exit(2)

    print_warnings(console, [w for w in read_manifest(manifest).warnings if w not in before])
    console.print(f"✅ Wrote {len(written)} {what} file(s)", style=console.bot_style)
