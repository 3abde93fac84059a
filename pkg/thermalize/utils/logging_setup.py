"""
Logging configuration
"""
import logging
import sys
from pathlib import Path
from typing import Optional

from .. import config

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """
    Configure the root logger with a console handler and an optional file handler

    Args:
        level: Log level name (default: config.LOG_LEVEL)
        log_file: Log file path; empty or None disables file logging (default: config.LOG_FILE)
    """
    level = (level or config.LOG_LEVEL).upper()
    log_file = config.LOG_FILE if log_file is None else log_file

    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(path, encoding="utf-8"))

    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)
