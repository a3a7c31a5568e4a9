import logging
import sys

import click

from lambdasym.core.errors import LambdaSymError


class LambdaSymGroup(click.Group):
    """
    Exit codes: 0 pass, 1 usage or input error, 2 a check that ran and failed.
    """

    def main(self, *args, **kwargs):
        kwargs.pop("standalone_mode", None)
        try:
            return super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(1)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)
        except LambdaSymError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(1)


@click.group(cls=LambdaSymGroup)
@click.option("-v", "--verbose", is_flag=True, help="Log at DEBUG level.")
def cli(verbose: bool):
    """
    The shell entry point to LambdaSym.
    """
    logging.basicConfig(
        format="%(asctime)s %(levelname)s [%(filename)s:%(lineno)d] %(message)s",
        level=logging.DEBUG if verbose else logging.INFO,
        force=True,
    )
