"""
Task called via the `lcmito init` CLI command
"""

# Imports
import argparse
import logging
from pathlib import Path
import shutil

# Internal imports
from lcmito.templates import TEMPLATES_DIR
from lcmito.lcm_logger import set_up_logger
from lcmito.constants import DEFAULT_LOGGER_NAME
from lcmito.ui import (
    BRIGHT_GREEN,
    RESET,
)
from lcmito.output import OutputManager


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


# Class definition
class InitTask:

    def __init__(self,
        args: argparse.Namespace,
    ):
        self.args = args
        self.wkdir = Path(self.args.wkdir)

        # Set up logger
        set_up_logger(self.args.log_level)

        # Output manager
        self.output_mgr: OutputManager = OutputManager(self.args)

    def run(self) -> int:
        """
        Write the starter configuration into the user's working directory
        """
        target = self.wkdir / Path(self.args.file).name

        if self.args.verbose:
            DEFAULT_LOGGER.info("Building configuration file...")
        else:
            self.output_mgr.step_starting("[dodger_blue2]Building configuration file...[/dodger_blue2]")  # noqa: E501

        # Never overwrite
        if target.is_file():
            self.output_mgr.step_failed()
            raise ValueError(f"`{target}` already exists!")

        shutil.copyfile(TEMPLATES_DIR / "config.yml", target)

        if self.args.verbose:
            DEFAULT_LOGGER.info(f"{BRIGHT_GREEN}Done!{RESET}")
        else:
            self.output_mgr.step_completed(f"Built configuration file `{target.name}`!")
        self.output_mgr.stop_live()
        return 0
