from kvnlab.config import load_config
from kvnlab.errors import ConfigError
from kvnlab.helpers import default_threads, logger
from kvnlab.output import elapsed, files_table, get_console, print_warnings, summary_table
from kvnlab.scenario import MANIFEST_NAME, run_scenario
from pathlib import Path
import click, sys


@click.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("-o", "--out", "out_dir", type=click.Path(file_okay=False), help="Override output.directory")
@click.option("-t", "--threads", type=int, default=default_threads, show_default="KVNLAB_THREADS or 1")
@click.option("-q", "--quiet", is_flag=True, help="Only print errors")
def run(config, out_dir, threads, quiet):
    """Run a scenario and write its diagnostics, snapshots and manifest."""
    console = get_console()
    if threads < 1:
        console.print("--threads must be at least 1", style=console.error_style)
        sys.exit(1)

    try:
        cfg = load_config(config)
    except ConfigError as e:
        console.print(f"🛑 Invalid config {config}:", style=console.error_style)
        for error in e.errors:
            console.print(f"  {error}", style=console.error_style, highlight=False)
        sys.exit(1)
    if out_dir:
        cfg = cfg.with_output_directory(out_dir)

    try:
        if quiet:
            manifest = run_scenario(cfg, threads)
        else:
            with console.status(f"Running {cfg.run.mode} scenario", spinner=console.DEFAULT_SPINNER):
                manifest = run_scenario(cfg, threads)
    except (ArithmeticError, OSError, ValueError) as e:
        logger.debug(f"{type(e).__name__} while running {config}")
        console.print(f"🛑 Run failed: {e}", style=console.error_style, highlight=False)
        sys.exit(2)

    if quiet:
        return
    console.print(summary_table(manifest))
    console.print(files_table(manifest))
    print_warnings(console, manifest.warnings)
    manifest_path = Path(cfg.output.directory) / MANIFEST_NAME
    console.print(f"✅ Wrote {manifest_path} in {elapsed(manifest)}", style=console.bot_style)
