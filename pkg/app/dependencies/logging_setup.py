# app/dependencies/logging_setup.py

import logging
from typing import Optional

from app.dependencies.settings import SPLITREC_LOG_LEVEL

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> int:
    """
    Configure root logging once per process.

    Args:
        level: level name (DEBUG, INFO, ...); falls back to SPLITREC_LOG_LEVEL

    Returns:
        int: the numeric level applied
    """
    name = (level or SPLITREC_LOG_LEVEL or "INFO").upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level: {level}")
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)
    return numeric
