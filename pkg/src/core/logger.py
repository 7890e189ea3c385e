"""
Logging setup for markov-ttsa.

Every record carries a ``run`` tag (``<command>/<session>``) once the CLI
has called :func:`set_run_context`; before that the tag is ``-``.

Usage:
    from src.core.logger import setup_logger, log_crash

    logger = setup_logger("engine")
"""
from __future__ import annotations

import logging
import sys
import traceback
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path

from src.core.config import Config

_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(run)s] %(message)s"

_configured: dict[str, logging.Handler] = {}
_run_tag = "-"


class _RunTagFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        record.run = _run_tag
        return True


def _log_dir() -> Path:
    return Path(Config.LOG_DIR)


def set_run_context(command: str, session: str) -> None:
    """Tag subsequent records with the running subcommand and event session."""
    global _run_tag
    _run_tag = f"{command}/{session}"


def set_console_level(level: int | str) -> None:
    """Change the console threshold of every configured logger (file logs stay at DEBUG)."""
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    for handler in _configured.values():
        handler.setLevel(level)


def setup_logger(name: str = "ttsa") -> logging.Logger:
    """
    Return the ``ttsa.<name>`` logger, configuring it on first use.

    Console output goes to stdout at ``TTSA_LOG_LEVEL``; everything at DEBUG
    goes to a rotating ``<log dir>/ttsa.log`` (10 MB x 5).
    """
    logger = logging.getLogger(f"ttsa.{name}")
    if name in _configured:
        return logger

    logger.setLevel(logging.DEBUG)
    logger.propagate = False
    logger.addFilter(_RunTagFilter())
    formatter = logging.Formatter(_FORMAT)

    console = logging.StreamHandler(sys.stdout)
    console.setLevel(getattr(logging, Config.LOG_LEVEL, logging.INFO))
    console.setFormatter(formatter)
    logger.addHandler(console)

    log_dir = _log_dir()
    log_dir.mkdir(parents=True, exist_ok=True)
    file_handler = RotatingFileHandler(log_dir / "ttsa.log", maxBytes=10 * 1024 * 1024, backupCount=5)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)

    _configured[name] = console
    return logger


def log_crash(e: BaseException, context: str = "") -> str:
    """Write a crash report under ``<log dir>/crashes/`` and return its path."""
    crash_dir = _log_dir() / "crashes"
    crash_dir.mkdir(parents=True, exist_ok=True)
    now = datetime.now()
    path = crash_dir / f"crash_{now.strftime('%Y%m%d_%H%M%S_%f')}.txt"

    lines = [
        f"Timestamp : {now.isoformat()}",
        f"Run       : {_run_tag}",
        f"Context   : {context}",
        f"Exception : {type(e).__name__}: {e}",
        "-" * 60,
    ]
    with path.open("w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
        f.write("".join(traceback.format_exception(type(e), e, e.__traceback__)))
    return str(path)
