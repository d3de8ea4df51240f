"""Logging helpers that keep stdout reserved for JSON results."""

import contextlib
import logging
import sys
import time
from typing import Generator


class StreamToLogger:
    """File-like object that forwards complete lines to a logger."""

    def __init__(self, logger: logging.Logger, level: int = logging.INFO):
        """Initialize the adapter.

        Args:
            logger: Logger receiving the lines.
            level: Level used for every forwarded line.
        """
        self.logger = logger
        self.level = level
        self.pending = ""

    def write(self, buf: str) -> None:
        """Log every finished line and keep the unterminated tail."""
        *lines, self.pending = (self.pending + buf).split("\n")
        for line in lines:
            if line.strip():
                self.logger.log(self.level, line.rstrip())

    def flush(self) -> None:
        """Log the unterminated tail, if any."""
        if self.pending.strip():
            self.logger.log(self.level, self.pending.rstrip())
        self.pending = ""


@contextlib.contextmanager
def redirect_output_to_logger(
    logger: logging.Logger, level: int = logging.INFO
) -> Generator[None, None, None]:
    """Route stdout and stderr into ``logger`` for the duration of the block."""
    saved = sys.stdout, sys.stderr
    out, err = StreamToLogger(logger, level), StreamToLogger(logger, logging.WARNING)
    sys.stdout, sys.stderr = out, err  # type: ignore[assignment]
    try:
        yield
    finally:
        out.flush()
        err.flush()
        sys.stdout, sys.stderr = saved


@contextlib.contextmanager
def log_duration(logger: logging.Logger, what: str) -> Generator[None, None, None]:
    """Log how long the block took at INFO level."""
    started = time.perf_counter()
    try:
        yield
    finally:
        logger.info(f"{what} took {time.perf_counter() - started:.2f}s")
