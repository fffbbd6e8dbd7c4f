"""
Constants used throughout the lcmito project
"""

# Imports
import sys


# Version
VERSION = "0.1.0"


# Logger name
DEFAULT_LOGGER_NAME = "lcmito_logger"


# Supported trajectory generators
SUPPORTED_GENERATORS = [
    "ou",
    "exact",
    "nonlinear",
    "aniso",
]


# Riccati solvers. `auto` uses the closed form when the conditioning block is scalar
# and the Hamiltonian has no imaginary-axis eigenvalues, and integrates otherwise.
SUPPORTED_RICCATI_METHODS = [
    "auto",
    "integrate",
    "hamiltonian",
]


# Experiment modes and baselines
SUPPORTED_EXPERIMENT_MODES = [
    "test",
    "discovery",
]
SUPPORTED_BASELINES = [
    "none",
    "granger",
]


# Numerical tolerances
COND_LIMIT = 1e12
DEGENERATE_VARIANCE = 1e-12
MAX_PHI_DRAWS = 100
SERIES_TERM_TOL = 1e-16


# Defaults from the synthetic protocol
DEFAULT_EDGE_PROB = 0.3
DEFAULT_DIAG_VALUE = 2.0
DEFAULT_SIGMA = 1.0
DEFAULT_DELTA = 0.01
DEFAULT_N_STEPS = 100

# Estimator defaults: every δ_c-spaced lag of each path, truncation of (I - Φ̃)
# effectively off. `pool_lags: false`, `stride: 10` and `u: 10` give the
# one-pair-per-trajectory fit.
DEFAULT_U = 1.0e6
DEFAULT_POOL_LAGS = True
DEFAULT_STRIDE = 1

DEFAULT_K = 3
DEFAULT_LEVEL = 0.05


# Exit codes
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


# Sys info
PLATFORM = sys.platform
PYTHON_VERSION = f"{sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}"  # noqa: E501
