"""
Configuration Module

This module provides process-wide settings for the OptionMarket simulator.
Experiment-specific parameters live in experiment files (see
core.experiment.config); the values here are numerical tolerances, solver
limits and output locations that rarely change between runs.
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

ENV_PREFIX = "OPTIONMARKET_"


def _env(name: str, default: str) -> str:
    return os.getenv(ENV_PREFIX + name, default)


# Output directory - every artifact is written inside this directory
OUTPUT_DIR = _env("OUTPUT_DIR", "output")

# Application settings
DEBUG_MODE = _env("DEBUG_MODE", "False").lower() == "true"
DEFAULT_SCENARIOS = int(_env("DEFAULT_SCENARIOS", "100000"))
WORKERS = int(_env("WORKERS", "1"))  # scenario / strike-grid parallelism

# Tolerances
FEASIBILITY_TOL = float(_env("FEASIBILITY_TOL", "1e-9"))
OPTIMALITY_TOL = float(_env("OPTIMALITY_TOL", "1e-6"))
EQUILIBRIUM_TOL = float(_env("EQUILIBRIUM_TOL", "1e-9"))  # relative to 1/rho
WEIGHT_SUM_TOL = 1e-12

# Allowable-trade box: open lower ends become [BOX_EPSILON, .]
BOX_EPSILON = float(_env("BOX_EPSILON", "1e-9"))

# Solver limits
BISECTION_TOL = float(_env("BISECTION_TOL", "1e-6"))
BISECTION_MAX_ITER = int(_env("BISECTION_MAX_ITER", "60"))
NEWTON_TOL = float(_env("NEWTON_TOL", "1e-10"))
NEWTON_MAX_ITER = int(_env("NEWTON_MAX_ITER", "100"))
MAX_EXACT_PARTICIPANTS = int(_env("MAX_EXACT_PARTICIPANTS", "6"))
COORDINATE_DESCENT_SWEEPS = int(_env("COORDINATE_DESCENT_SWEEPS", "20"))

# CSV formatting
CSV_FLOAT_FORMAT = "%.12g"


def describe() -> dict:
    """
    Snapshot of the active settings, used in debug logging.

    Returns:
        Mapping of setting name to value
    """
    return {
        "OUTPUT_DIR": OUTPUT_DIR,
        "DEBUG_MODE": DEBUG_MODE,
        "DEFAULT_SCENARIOS": DEFAULT_SCENARIOS,
        "WORKERS": WORKERS,
        "FEASIBILITY_TOL": FEASIBILITY_TOL,
        "OPTIMALITY_TOL": OPTIMALITY_TOL,
        "EQUILIBRIUM_TOL": EQUILIBRIUM_TOL,
        "BOX_EPSILON": BOX_EPSILON,
        "BISECTION_TOL": BISECTION_TOL,
        "BISECTION_MAX_ITER": BISECTION_MAX_ITER,
        "NEWTON_TOL": NEWTON_TOL,
        "NEWTON_MAX_ITER": NEWTON_MAX_ITER,
        "MAX_EXACT_PARTICIPANTS": MAX_EXACT_PARTICIPANTS,
        "COORDINATE_DESCENT_SWEEPS": COORDINATE_DESCENT_SWEEPS,
    }
