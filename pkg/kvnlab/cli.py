from kvnlab import version as kvnlab_version
from kvnlab.commands import plot, run, selftest, validate
from kvnlab.helpers import set_log_level
import click

# -------------------------- Top level command group ------------------------- #


@click.group()
@click.version_option(kvnlab_version, "--version", "-V")
@click.help_option("--help", "-h")
@click.option("-d", "--debug-output", is_flag=True, help="Enable debug output")
@click.pass_context
def cli(ctx, debug_output):
    """Koopman-von Neumann phase-space and spinor-field simulations."""
    ctx.ensure_object(dict)
    if debug_output:
        set_log_level("DEBUG")


# -------------------------------- Subcommands ------------------------------- #

cli.add_command(plot)
cli.add_command(run)
cli.add_command(selftest)
cli.add_command(validate)


if __name__ == "__main__":  # pragma: no cover
    cli()
