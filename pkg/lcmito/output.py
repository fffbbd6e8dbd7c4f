"""
Console manager for printing progress and result tables in the terminal. This is
*separate* from our logging infrastructure, which is handled in `lcm_logger.py`.
"""

# Imports
import argparse
from enum import Enum
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from rich.console import Console, Group, RenderableType
from rich.live import Live
from rich.spinner import Spinner
from rich.table import Table
from rich.tree import Tree

from lcmito.constants import DEFAULT_LOGGER_NAME
from lcmito.ui import StageEnum


class Symbol(str, Enum):
    SUCCESS = "[green]✓[/green]"
    SUBSTEP_SUCCESS = "[dodger_blue2]•[/dodger_blue2]"
    FAILED = "[red]✕[/red]"
    SKIPPED = "[light_goldenrod1]≫[/light_goldenrod1]"
    FLAGGED = "[light_goldenrod1]![/light_goldenrod1]"


class OutputManager:

    console: Console
    verbose: bool
    log_level: str
    logger: logging.Logger

    # Tracking
    current_renders_all: List[Tree]
    current_render: Optional[Tree]
    live: Optional[Live]

    def __init__(
        self,
        args: argparse.Namespace,
        default_logger_name: str = DEFAULT_LOGGER_NAME,
    ):
        self.console = Console(file=sys.stdout, highlight=False)
        self.args = args

        # Verbosity and log level
        self.verbose = self.args.verbose
        self.log_level = self.args.log_level

        # Logger
        self.logger = logging.getLogger(default_logger_name)

        # Tracking stuff
        self.current_renders_all = []
        self.current_render = None
        self.live = None

    def make_live(self, renderable: RenderableType):
        """
        Creates a `rich.Live` instance with the given renderable, inside a `rich.Group`
        so that sub-steps can be added later.
        """
        if self.live is not None:
            self.stop_live()

        self.current_render_group = Group(renderable)
        live = Live(
            renderable=self.current_render_group,
            console=self.console,
            transient=True,
            refresh_per_second=4
        )
        self.live = live
        self.live.start()
        return self.live

    def stop_live(self) -> None:
        """
        Stop the current `Live` object and set to `None`
        """
        if self.live is not None:
            self.live.stop()
            self.live = None

    def step_starting(self,
        message: str,
        is_substep: bool = False
    ) -> Optional[Live]:
        """
        Render a spinner for a step that is starting.

        args:
            message: message to log
            is_substep: boolean indicating whether step is a sub-step
        """
        # In `verbose` mode the logger does the talking
        if self.verbose:
            return None

        elif is_substep:
            if not isinstance(self.current_render, Tree):
                raise ValueError("sub-step started outside of a step")
            spinner = Spinner(name="dots", text=message, style="dodger_blue2")
            subtree = Tree(spinner, guide_style="gray50")
            self.current_render.add(subtree)
            self.current_renders_all.append(subtree)

        else:
            spinner = Spinner(name="dots", text=message, style="dodger_blue2")
            tree = Tree(spinner, guide_style="gray50")
            self.current_renders_all.append(tree)
            self.current_render = tree
            self.make_live(tree)

        return self.live

    def step_completed(self,
        message: RenderableType,
        is_substep: bool = False,
        symbol: Optional[Symbol] = None,
    ) -> None:
        """
        Replace the spinner of the most recent step with a completion message.

        args:
            message: message to log
            is_substep: boolean indicating whether step is a sub-step
            symbol: leading symbol; defaults to a check mark
        """
        if symbol is None:
            symbol = Symbol.SUBSTEP_SUCCESS if is_substep else Symbol.SUCCESS
        msg = f"{symbol.value} {message}"
        if self.verbose or len(self.current_renders_all) == 0:
            return None
        tree = self.current_renders_all.pop()
        tree.label = msg

        if not is_substep:
            self.console.print(self.current_render)
            self.stop_live()
        return None

    def step_failed(self) -> None:
        """
        Mark the running step as failed and every step still pending as skipped
        """
        if self.verbose or len(self.current_renders_all) == 0:
            self.stop_live()
            return None

        tree: Tree = self.current_renders_all.pop()

        # Labels are always spinners at this point
        lbl: Spinner = tree.label  # type: ignore
        txt = lbl.text.__str__().lower().replace("...", "")
        tree.label = f"{Symbol.FAILED.value} [red]Failed when {txt}[/red]"

        while len(self.current_renders_all) > 0:
            curr_elt: Tree = self.current_renders_all.pop()
            curr_lbl: Spinner = curr_elt.label  # type: ignore
            curr_txt = curr_lbl.text.__str__()
            curr_elt.label = f"{Symbol.SKIPPED.value} Skipped {curr_txt.lower().replace('...', '')}"  # noqa: E501

        self.console.print(self.current_render)
        self.stop_live()
        return None

    def log_output(self,
        run_name: str,
        stage: StageEnum,
        level: str,
        msg: str,
    ) -> None:
        """
        Log message to stdout in `--verbose` mode

        args:
            run_name: run to whom the log is associated
            stage: pipeline stage. This controls what's in [...] in the logs
            level: log level
            msg: log message
        """
        if not self.verbose:
            return None
        line = f"{stage.value}{run_name} | {msg}"
        if level == "info":
            self.logger.info(line)
        elif level == "warn":
            self.logger.warning(line)
        elif level == "error":
            self.logger.error(line)
        elif level == "debug":
            self.logger.debug(line)
        else:
            raise ValueError(f"unrecognized `level` {level}")

    def step(self,
        run_name: str,
        stage: StageEnum,
        message: str,
    ) -> None:
        """
        Announce a step in whichever mode we are in
        """
        if self.verbose:
            self.log_output(run_name, stage, "info", message)
        else:
            self.step_starting(f"[dodger_blue2]{message}[/dodger_blue2]")

    def done(self,
        run_name: str,
        stage: StageEnum,
        message: str,
        symbol: Optional[Symbol] = None,
    ) -> None:
        if self.verbose:
            self.log_output(run_name, stage, "info", message)
        else:
            self.step_completed(message, symbol=symbol)

    def print_table(self,
        rows: Any,
        title: Optional[str] = None,
        columns: Optional[Sequence[str]] = None,
    ) -> None:
        """
        Render a result table. `rows` is a DataFrame or a list of dicts.
        """
        frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows)
        if columns is not None:
            frame = frame[list(columns)]
        table = Table(title=title, header_style="bold", title_justify="left")
        for col in frame.columns:
            table.add_column(str(col), justify="right")
        for record in frame.to_dict(orient="records"):
            table.add_row(*[_fmt(record[c]) for c in frame.columns])
        self.console.print(table)

    def print_summary(self, summary: Dict[str, Any], title: Optional[str] = None):
        self.print_table(
            [{"field": k, "value": v} for k, v in summary.items()], title=title
        )


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if value != value:
            return "-"
        return f"{value:.4g}"
    return str(value)
