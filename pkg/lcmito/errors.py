"""
Numerical error type. Validation problems raise `ValueError`, like the rest of the
configuration code; anything that goes wrong inside the linear algebra or the
integrators raises `NumericalError` so the CLI can tell the two apart.
"""

# Imports
from typing import Optional


class NumericalError(ArithmeticError):

    def __init__(self, msg: str, condition: Optional[float] = None):
        super().__init__(msg)
        self.condition = condition
