"""
Logging configuration for command-line runs.
"""

import logging
import sys
from pathlib import Path
from typing import Optional

from config import ENABLE_LOGGING, LOG_FILE, LOG_LEVEL


def setup_logging(log_dir: Optional[Path] = None, verbose: bool = False) -> logging.Logger:
    """
    Configure root logging to stderr and, when enabled, to a log file.

    Args:
        log_dir: Directory of the log file (current directory if None)
        verbose: Lower the level to DEBUG

    Returns:
        The root logger
    """
    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG if verbose else getattr(logging, LOG_LEVEL, logging.INFO))

    # Remove existing handlers to prevent duplicate output across invocations
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(logging.Formatter("%(levelname)s - %(name)s - %(message)s"))
    logger.addHandler(console_handler)

    if ENABLE_LOGGING:
        log_path = (log_dir or Path(".")) / LOG_FILE
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_path, mode="a", encoding="utf-8")
        file_handler.setFormatter(logging.Formatter("%(asctime)s - %(levelname)s - %(name)s - %(message)s"))
        logger.addHandler(file_handler)

    # Worker pools are chatty at INFO
    logging.getLogger("joblib").setLevel(logging.WARNING)
    return logger
