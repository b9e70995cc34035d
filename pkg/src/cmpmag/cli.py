"""``cmpmag`` command line: one subcommand per workbench task."""

from __future__ import annotations

import sys

import click

from . import workbench


def _options(fn):
    fn = click.option("--force-overwrite", is_flag=True,
                      help="Allow writing into a non-empty output directory.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="RNG seed for synthetic data (default: config or 0).")(fn)
    fn = click.option("--out", "out", type=click.Path(file_okay=False), default=None,
                      help="Output directory (default: config output_dir).")(fn)
    fn = click.option("--config", "config", type=click.Path(dir_okay=False), required=True,
                      help="YAML run configuration.")(fn)
    return fn


def _execute(config, out, seed, force_overwrite, task=None):
    try:
        cfg = workbench.load_config(config, out, seed, force_overwrite, task)
    except FileNotFoundError as exc:
        click.echo(f"cannot read config: {exc}", err=True)
        sys.exit(workbench.EXIT_IO)
    except workbench.ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(workbench.EXIT_CONFIG)
    outcome = workbench.run(cfg)
    click.echo(outcome.message, err=outcome.status != workbench.EXIT_OK)
    sys.exit(outcome.status)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Cavity magnon polariton magnetometry workbench.

    Thread count for spectrum maps is read from CMPMAG_THREADS.
    """


@main.command("run")
@_options
def run_cmd(config, out, seed, force_overwrite):
    """Run whatever task the config names."""
    _execute(config, out, seed, force_overwrite)


def _task_command(task):
    @_options
    def cmd(config, out, seed, force_overwrite):
        _execute(config, out, seed, force_overwrite, task)

    cmd.__doc__ = f"Run the {task} task."
    return main.command(task)(cmd)


for _task in workbench.TASKS:
    _task_command(_task)
