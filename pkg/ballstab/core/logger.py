"""Logger module"""
import logging
import os
import sys

ROOT_LOGGER = "ballstab"


def get_logger(name: str) -> logging.Logger:
    """Get or create a logger under the ``ballstab`` tree.

    The first call installs one stdout handler on the package root logger;
    children propagate to it.
    """
    root = logging.getLogger(ROOT_LOGGER)
    if not root.handlers:
        handler = logging.StreamHandler(sys.stdout)
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        handler.setFormatter(formatter)
        root.addHandler(handler)
        root.setLevel(_level_from_env())
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


def set_quiet(quiet: bool = True) -> None:
    """Raise the package log level to WARNING (or restore the env level)."""
    get_logger(ROOT_LOGGER).setLevel(logging.WARNING if quiet else _level_from_env())


def _level_from_env() -> int:
    level = os.getenv("BIG_LOG_LEVEL", "INFO").upper().strip()
    return getattr(logging, level, logging.INFO)
