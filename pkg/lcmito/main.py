"""
Entrypoint into lcmito
"""


# Imports
import argparse
import logging
import os
from pathlib import Path
import sys
from typing import Callable, Optional, Tuple

import rich_click as click

# Internal imports
from lcmito.tasks import (
    init as init_task,
    simulate as simulate_task,
    estimate as estimate_task,
    test as test_task,
    discover as discover_task,
    experiment as experiment_task,
)
from lcmito.constants import (
    DEFAULT_LOGGER_NAME,
    EXIT_NUMERICAL,
    EXIT_VALIDATION,
)
from lcmito.errors import NumericalError
from lcmito.lcm_logger import set_up_logger
import lcmito.ui


# Use markdown
click.rich_click.USE_MARKDOWN = True


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


def _execute(task_cls: Callable, args: argparse.Namespace) -> int:
    """
    Build and run a task. Validation errors exit with 1, numerical failures with 2
    and a non-zero code returned by the task with that code.
    """
    task = None
    try:
        task = task_cls(args)
        code = task.run()
    except NumericalError as e:
        code, msg = EXIT_NUMERICAL, f"numerical failure: {e}"
    except ValueError as e:
        code, msg = EXIT_VALIDATION, str(e)
    else:
        if code:
            sys.exit(code)
        return code
    set_up_logger(args.log_level)
    if task is not None and hasattr(task, "output_mgr"):
        task.output_mgr.step_failed()
    DEFAULT_LOGGER.error(msg)
    sys.exit(code)


def run_options(fn):
    """
    Options shared by every command that reads a run configuration
    """
    options = [
        click.option(
            "--file", "-f",
            type=str,
            help="""lcmito configuration file.""",
            required=True,
        ),
        click.option(
            "--name",
            help="""Name of run within the configuration file.""",
            required=False,
        ),
        click.option(
            "--seed",
            type=int,
            help="""Override the run seed.""",
            required=False,
        ),
        click.option(
            "--workers",
            type=click.IntRange(min=1),
            help="""Override the number of concurrent workers.""",
            required=False,
        ),
        click.option(
            "--out",
            type=str,
            help="""Override the output directory.""",
            required=False,
        ),
        click.option(
            "--set", "overrides",
            multiple=True,
            help="""Override any configuration value, e.g. `--set test.K=4`. Repeatable.""",  # noqa: E501
            required=False,
        ),
        click.option(
            '--verbose', '-v',
            is_flag=True,
            default=False,
            help=f"""Log all activity after command execution according to `--log-level`. _{lcmito.ui.DARK_BLUE}[default: False]{lcmito.ui.RESET}_""",  # noqa: E501
            required=False,
        ),
        click.option(
            '--log-level', '-l',
            type=click.Choice(['info', 'warn', 'error', 'debug']),
            default="info",
            help=f"""Set the log level. _{lcmito.ui.DARK_BLUE}[default: info]{lcmito.ui.RESET}_""",  # noqa: E501
            required=False,
        ),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _namespace(
    file: str,
    name: Optional[str],
    seed: Optional[int],
    workers: Optional[int],
    out: Optional[str],
    overrides: Tuple[str, ...],
    verbose: bool,
    log_level: str,
) -> argparse.Namespace:
    args = argparse.Namespace()
    args.file = file
    args.name = name
    args.wkdir = Path(os.path.abspath(file)).parent
    args.seed = seed
    args.workers = workers
    args.out = out
    args.overrides = list(overrides)
    args.verbose = verbose
    args.log_level = log_level
    return args


# Construct command
@click.group
def cli():
    """Test conditional local independence in multivariate Ornstein-Uhlenbeck
    processes and recover local independence graphs."""
    pass


@cli.command()
@click.option(
    "--file", "-f",
    type=str,
    default="lcmito.yml",
    help=f"""Name of new configuration file. _{lcmito.ui.DARK_BLUE}[default: lcmito.yml]{lcmito.ui.RESET}_""",  # noqa: E501
    required=False,
)
@click.option(
    '--verbose', '-v',
    is_flag=True,
    default=False,
    help=f"""Log all activity after command execution according to `--log-level`. _{lcmito.ui.DARK_BLUE}[default: False]{lcmito.ui.RESET}_""",  # noqa: E501
    required=False,
)
@click.option(
    '--log-level', '-l',
    type=click.Choice(['info', 'warn', 'error', 'debug']),
    default="info",
    help=f"""Set the log level. _{lcmito.ui.DARK_BLUE}[default: info]{lcmito.ui.RESET}_""",  # noqa: E501
    required=False,
)
def init(
    file: str,
    verbose: bool,
    log_level: str,
):
    """Create a starter configuration YAML.

    <br>Examples:
    - lcmito init
    - lcmito init --file study.yml
    """
    args = argparse.Namespace()
    args.file = file
    args.wkdir = Path(os.path.abspath(file)).parent
    args.verbose = verbose
    args.log_level = log_level

    return _execute(init_task.InitTask, args)


@cli.command()
@run_options
def simulate(**kwargs):
    """Simulate OU trajectories and write them as CSV.

    <br>Examples:
    - lcmito simulate -f lcmito.yml
    - lcmito simulate -f lcmito.yml --seed 3 --set model.n_traj=500
    """
    return _execute(simulate_task.SimulateTask, _namespace(**kwargs))


@cli.command()
@run_options
def estimate(**kwargs):
    """Fit the OU drift and diffusion from trajectories.

    <br>Examples:
    - lcmito estimate -f lcmito.yml --set data=trajectories.csv
    """
    return _execute(estimate_task.EstimateTask, _namespace(**kwargs))


@cli.command()
@run_options
def test(**kwargs):
    """Test one conditional local independence query.

    <br>Examples:
    - lcmito test -f lcmito.yml
    - lcmito test -f lcmito.yml --set query.alpha=2 --set query.beta=0
    """
    return _execute(test_task.TestTask, _namespace(**kwargs))


@cli.command()
@run_options
def discover(**kwargs):
    """Recover the local independence graph.

    <br>Examples:
    - lcmito discover -f lcmito.yml --workers 4
    - lcmito discover -f lcmito.yml --set test.n_splits=3
    """
    return _execute(discover_task.DiscoverTask, _namespace(**kwargs))


@cli.command()
@run_options
def experiment(**kwargs):
    """Run a Monte Carlo experiment (rejection rates or graph recovery).

    <br>Examples:
    - lcmito experiment -f lcmito/examples/type_i_error.yml --workers 8
    """
    return _execute(experiment_task.ExperimentTask, _namespace(**kwargs))
