"""
logging_conf.py
---------------
Logging setup for the `ee` command line and library callers.
Worker threads of the Monte Carlo and sweep pools log through the same
handler, so the thread name is part of the format.
"""

import logging

from common.config import EE_LOG_LEVEL

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] [%(threadName)s] %(name)s: %(message)s"


def resolve_level(level=None) -> int:
    """
    Numeric log level from a name, a number or `EE_LOG_LEVEL`.

    Raises:
        ValueError: Unknown level name.
    """
    if level is None:
        level = EE_LOG_LEVEL
    if isinstance(level, int):
        return level
    numeric = logging.getLevelName(str(level).upper())
    if not isinstance(numeric, int):
        raise ValueError(f"unknown log level '{level}'")
    return numeric


def setup_logging(level=None) -> logging.Logger:
    """
    Attach one stream handler to the root logger and set its level.

    Calling it again only updates the level.

    Args:
        level (str | int | None): Override of `EE_LOG_LEVEL`.

    Returns:
        logging.Logger: The root logger.
    """
    root = logging.getLogger()
    root.setLevel(resolve_level(level))
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
    return root
