"""
config.py
---------
Central configuration management for the EE toolkit.
Loads environment variables from .env and provides helper functions.
"""

import os
import logging
from pathlib import Path

import yaml
from dotenv import load_dotenv

# Load environment variables globally
load_dotenv()

logger = logging.getLogger(__name__)

COMMON_DIR = Path(__file__).resolve().parent

# Parallelism and logging
EE_THREADS = int(os.getenv("EE_THREADS", os.cpu_count() or 1))
EE_LOG_LEVEL = os.getenv("EE_LOG_LEVEL", "INFO").upper()

# Monte Carlo: trials per counter-based substream
EE_MC_BLOCK_SIZE = int(os.getenv("EE_MC_BLOCK_SIZE", 16))

# Closed-form antenna / power rule used by default: "stationarity" or "paper"
EE_KKT_VARIANT = os.getenv("EE_KKT_VARIANT", "stationarity").lower()

# Bundled inputs
EE_DEFAULT_SCENARIO = Path(os.getenv("EE_DEFAULT_SCENARIO", COMMON_DIR / "default_scenario.txt"))
FIGURES_CONFIG = COMMON_DIR / "config.yaml"

# Solver defaults
DINKELBACH_TOL = 1e-9
DINKELBACH_MAX_ITER = 50
DUAL_TOL = 1e-9
DUAL_MAX_ITER = 10_000
DUAL_STEP0 = 1.0
FEASIBILITY_RTOL = 1e-9
JOINT_TOL = 1e-9
JOINT_MAX_ITER = 50

# Scenario defaults
THERMAL_NOISE_DBM_PER_HZ = -174.0
DEFAULT_NOISE_FIGURE_DB = 7.0
MIN_DISTANCE_M = 35.0
DEFAULT_GRID_SPACING_M = 500.0
DEFAULT_PATHLOSS_EXPONENT = 3.76

SUMMARY_FILE = "summary.txt"


def load_config(path=None) -> dict:
    """
    Load the YAML file that defines the figure-reproduction sweeps.

    Args:
        path (str | Path | None): Optional override of the bundled file.

    Returns:
        dict: Parsed configuration.
    """
    config_path = Path(path) if path is not None else FIGURES_CONFIG
    with open(config_path, "r") as f:
        return yaml.safe_load(f)


def summary() -> None:
    """Log a summary of the configuration."""
    logger.info("---- Configuration Summary ----")
    logger.info(f"Threads: {EE_THREADS}, Monte Carlo block size: {EE_MC_BLOCK_SIZE}")
    logger.info(f"Closed-form variant: {EE_KKT_VARIANT}")
    logger.info(f"Default scenario: {EE_DEFAULT_SCENARIO}")
    logger.info(f"Log level: {EE_LOG_LEVEL}")
