from kvnlab.config import dump_config, load_config
from kvnlab.errors import ConfigError
from kvnlab.output import get_console
import click, sys


@click.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--show", is_flag=True, help="Print the config with every default filled in")
def validate(config, show):
    """Check a scenario config and report every problem found."""
    console = get_console()
    try:
        cfg = load_config(config)
    except ConfigError as e:
        console.print(f"🛑 {len(e.errors)} problem(s) in {config}:", style=console.error_style)
        for error in e.errors:
            console.print(f"  {error}", style=console.error_style, highlight=False)
        sys.exit(1)

    if show:
        console.print(dump_config(cfg), highlight=False)
    console.print(f"✅ {config} is a valid {cfg.run.mode} scenario", style=console.bot_style)
