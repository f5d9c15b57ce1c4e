"""
Logging module for the flowerbot inspection toolkit
Provides centralized logging configuration and utilities
"""

import logging
import sys
from typing import Optional
from pathlib import Path

ROOT_LOGGER = "flowerbot"

# Log format
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# Log levels
LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}


def setup_logger(
    name: str = ROOT_LOGGER,
    level: str = "WARNING",
    log_file: Optional[Path] = None,
    stream: bool = True
) -> logging.Logger:
    """
    Set up and configure a logger instance.

    Console output goes to stderr; stdout belongs to the CLI transcript.
    Calling it again updates the level instead of stacking handlers.

    Args:
        name: Logger name (the package root by default)
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Optional path to log file
        stream: Whether to log to stderr

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    numeric_level = LOG_LEVELS.get(level.upper(), logging.WARNING)

    if logger.handlers:
        has_file = any(isinstance(h, logging.FileHandler) for h in logger.handlers)
        logger.setLevel(logging.DEBUG if has_file else numeric_level)
        for handler in logger.handlers:
            if not isinstance(handler, logging.FileHandler):
                handler.setLevel(numeric_level)
                handler.setStream(sys.stderr)
        return logger

    logger.setLevel(logging.DEBUG if log_file else numeric_level)
    logger.propagate = False

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    if stream:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(numeric_level)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)  # File gets all logs
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Get a logger instance under the package namespace.

    Args:
        name: Optional logger name (defaults to calling module name)

    Returns:
        Logger instance named ``flowerbot.<name>``
    """
    if name is None:
        import inspect
        frame = inspect.currentframe()
        if frame and frame.f_back:
            name = frame.f_back.f_globals.get("__name__", ROOT_LOGGER)
        else:
            name = ROOT_LOGGER

    if name != ROOT_LOGGER and not name.startswith(ROOT_LOGGER + "."):
        name = f"{ROOT_LOGGER}.{name}"

    return logging.getLogger(name)
