#!/usr/bin/env python3
"""
Logging for spectra.

Two sinks per logger: short console messages on stderr (stdout is reserved for
report output such as ``spectra report --format csv``), and a dated file in
the log directory with function/line context. Runs also write
``STRUCTURED_LOG:`` JSON lines into the file; each carries the run context
(experiment, n, p, beta, seed) active at the time.
"""

import json
import logging
import sys
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, TextIO

CONSOLE_FORMAT = "%(message)s"
FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"
STRUCTURED_PREFIX = "STRUCTURED_LOG: "


class ColoredFormatter(logging.Formatter):
    """Colors warnings and errors on a terminal; plain text otherwise"""

    LEVEL_COLORS = {
        logging.DEBUG: "\033[36m",
        logging.WARNING: "\033[33m",
        logging.ERROR: "\033[31m",
        logging.CRITICAL: "\033[35m",
    }
    RESET = "\033[0m"

    def __init__(self, fmt: str = CONSOLE_FORMAT, use_color: bool = True):
        super().__init__(fmt)
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        # The record is shared with the file handler, so color the output only
        text = super().format(record)
        color = self.LEVEL_COLORS.get(record.levelno)
        if self.use_color and color:
            return f"{color}{text}{self.RESET}"
        return text


def _level(name: str) -> int:
    value = getattr(logging, str(name).upper(), None)
    if not isinstance(value, int):
        raise ValueError(f"Unknown logging level: {name}")
    return value


class UserFriendlyLogger:
    """
    A named spectra logger.

    ``user_*`` methods are for the person at the terminal and are also kept
    in ``user_messages``; ``debug``/``info`` go mostly to the file.
    ``structured_log`` and ``performance_log`` write machine-readable records
    that ``grep STRUCTURED_LOG`` pulls back out of a long run's log.
    """

    def __init__(
        self,
        name: str,
        log_dir: str = "logs",
        console_level: str = "INFO",
        file_level: str = "DEBUG",
        stream: Optional[TextIO] = None,
    ):
        self.name = name
        self.logger = logging.getLogger(f"spectra.{name}")
        self.stream = stream
        self.context: Dict[str, Any] = {}
        self.user_messages: List[Dict[str, Any]] = []
        self.reconfigure(log_dir, console_level, file_level)

    @property
    def log_file(self) -> Path:
        return self.log_dir / f"{self.name}_{datetime.now().strftime('%Y%m%d')}.log"

    def reconfigure(self, log_dir: str, console_level: str, file_level: str):
        """Replace both handlers; used at construction and by configure_logging."""
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)

        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)

        stream = self.stream or sys.stderr
        console = logging.StreamHandler(stream)
        console.setLevel(_level(console_level))
        console.setFormatter(ColoredFormatter(use_color=bool(getattr(stream, "isatty", lambda: False)())))

        file_handler = logging.FileHandler(self.log_file, encoding="utf-8")
        file_handler.setLevel(_level(file_level))
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT))

        self.logger.addHandler(console)
        self.logger.addHandler(file_handler)

    # User-facing messages

    def _user(self, level: str, log_level: int, text: str, **details):
        self.logger.log(log_level, text, stacklevel=3)
        self.user_messages.append({"level": level, "message": text, **details})

    def user_info(self, message: str, **details):
        self._user("info", logging.INFO, message, **details)

    def user_success(self, message: str, **details):
        self._user("success", logging.INFO, f"✅ {message}", **details)

    def user_warning(self, message: str, **details):
        self._user("warning", logging.WARNING, f"⚠️  {message}", **details)

    def user_error(self, message: str, **details):
        self._user("error", logging.ERROR, f"❌ {message}", **details)

    # Plain levels

    def debug(self, message: str):
        self.logger.debug(message, stacklevel=2)

    def info(self, message: str):
        self.logger.info(message, stacklevel=2)

    def warning(self, message: str):
        self.logger.warning(message, stacklevel=2)

    def error(self, message: str):
        self.logger.error(message, stacklevel=2)

    # Operations and records

    def operation_start(self, operation: str, **details):
        """Announce a long operation (a run, a resume, a ledger replay)."""
        self.logger.info(f"🔄 {operation}")
        self.structured_log("operation_start", {"operation": operation, **details})

    def operation_complete(self, operation: str, **details):
        self.logger.info(f"✅ {operation} completed")
        self.structured_log("operation_complete", {"operation": operation, **details})

    @contextmanager
    def run_context(self, **fields) -> Iterator[Dict[str, Any]]:
        """Attach ``fields`` to every structured record logged inside the block."""
        saved = dict(self.context)
        self.context.update(fields)
        try:
            yield self.context
        finally:
            self.context = saved

    def structured_log(self, event_type: str, data: Dict[str, Any]):
        entry = {
            "timestamp": datetime.now().isoformat(),
            "event_type": event_type,
            "logger": self.name,
            **self.context,
            **data,
        }
        self.logger.debug(STRUCTURED_PREFIX + json.dumps(entry, default=str), stacklevel=2)

    def performance_log(self, operation: str, duration: float, **metrics):
        self.structured_log("performance", {"operation": operation, "duration_seconds": duration, **metrics})

    # Console reports

    def report_section(self, title: str, separator_char: str = "=", width: int = 60):
        rule = separator_char * width
        self.user_info(f"\n{rule}")
        self.user_info(f"📊 {title}")
        self.user_info(rule)

    def report_item(self, label: str, value: str, prefix: str = ""):
        self.user_info(f"{prefix}{label}: {value}")


_loggers: Dict[str, UserFriendlyLogger] = {}
_defaults: Dict[str, str] = {"log_dir": "logs", "console_level": "INFO", "file_level": "DEBUG"}


def get_logger(
    name: str,
    log_dir: Optional[str] = None,
    console_level: Optional[str] = None,
    file_level: Optional[str] = None,
) -> UserFriendlyLogger:
    """
    Get or create the logger called ``name``.

    Arguments left out take the defaults set by ``configure_logging``. A
    logger is created once per name; later calls return it unchanged.
    """
    if name not in _loggers:
        _loggers[name] = UserFriendlyLogger(
            name,
            log_dir or _defaults["log_dir"],
            console_level or _defaults["console_level"],
            file_level or _defaults["file_level"],
        )
    return _loggers[name]


def configure_logging(console_level: str = "INFO", file_level: str = "DEBUG", log_dir: Optional[str] = "logs"):
    """
    Set the logging defaults and apply them to every existing logger.

    Modules create their loggers at import time, before the command line is
    parsed, so ``--log-level`` and ``--log-dir`` must reach those too.

    Raises:
        ValueError: If a level name is not a logging level
    """
    _level(console_level)
    _level(file_level)
    _defaults.update(log_dir=log_dir or "logs", console_level=console_level, file_level=file_level)
    for existing in _loggers.values():
        existing.reconfigure(_defaults["log_dir"], console_level, file_level)
