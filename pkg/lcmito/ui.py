"""
UI for logging events
"""

from enum import Enum
from typing import Final
from dataclasses import dataclass


####################
# ANSI color codes #
####################

RED = "\u001b[31m"
YELLOW = "\u001b[33m"
DARK_BLUE = "\u001b[34m"
CYAN = "\u001b[36m"
RESET = "\u001b[0m"
BRIGHT_GREEN = "\u001b[32;1m"
BOLD = "\u001b[1m"
ORANGE_BROWN = "\u001b[38;5;180m"


###########
# Classes #
###########

LOG_DIVIDERS = [
    "simulate",
    "estimate",
    "test",
    "discover",
    "experiment",
]
MAX_LENGTH = max([len(x) for x in LOG_DIVIDERS])


class Divider:

    def __init__(self, divider: str):
        self.divider = divider

    def __str__(self) -> str:
        return f"{BOLD}[{self.divider}]" + " " * ((MAX_LENGTH + 1) - len(self.divider))


class UiEvent(str, Enum):
    SIMULATE: Final = "\u001b[38;5;75m"
    ESTIMATE: Final = "\u001b[38;5;147m"
    TEST: Final = "\u001b[38;5;178m"
    DISCOVER: Final = "\u001b[38;5;10m"
    EXPERIMENT: Final = "\u001b[38;5;213m"


@dataclass
class Stage:
    name: str
    event: UiEvent

    def __str__(self) -> str:
        divider: Divider = Divider(self.name)
        return f"{self.event}{divider.__str__()}{RESET}"


class StageEnum(str, Enum):
    SIMULATE: Final = Stage("simulate", UiEvent.SIMULATE).__str__()
    ESTIMATE: Final = Stage("estimate", UiEvent.ESTIMATE).__str__()
    TEST: Final = Stage("test", UiEvent.TEST).__str__()
    DISCOVER: Final = Stage("discover", UiEvent.DISCOVER).__str__()
    EXPERIMENT: Final = Stage("experiment", UiEvent.EXPERIMENT).__str__()
