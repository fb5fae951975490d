"""
storage.py
----------
Provides base storage utilities for CSV outputs on the local filesystem.
"""

import logging
from pathlib import Path

import pandas as pd

logger = logging.getLogger(__name__)


def ensure_output_dir(path):
    """
    Ensure that a given output directory exists.

    Args:
        path (str | Path): Directory to verify or create.

    Returns:
        Path: The directory.
    """
    directory = Path(path)
    try:
        if not directory.exists():
            directory.mkdir(parents=True)
            logger.info(f"Created output directory: {directory}")
        elif not directory.is_dir():
            raise NotADirectoryError(f"'{directory}' exists and is not a directory")
    except Exception as e:
        logger.error(f"Error ensuring output directory '{directory}': {e}")
        raise
    return directory


def write_csv(df: pd.DataFrame, path) -> Path:
    """
    Write a DataFrame as CSV with a locale-free, deterministic layout.

    Floats use the shortest repr that round-trips, so identical frames give
    byte-identical files.

    Args:
        df (pd.DataFrame): Dataset to write.
        path (str | Path): Target file.

    Returns:
        Path: The written file.
    """
    target = Path(path)
    if target.parent != Path(""):
        ensure_output_dir(target.parent)
    df.to_csv(target, index=False, sep=",", decimal=".", lineterminator="\n")
    logger.info(f"Wrote {len(df)} rows to {target}")
    return target


def read_csv(path, **kwargs) -> pd.DataFrame:
    """
    Read a CSV file with round-trip float precision.

    Args:
        path (str | Path): Source file.
        **kwargs: Passed to `pandas.read_csv`.

    Returns:
        pd.DataFrame: Loaded dataset.
    """
    df = pd.read_csv(path, float_precision="round_trip", **kwargs)
    logger.debug(f"Read {len(df)} rows from {path}")
    return df
