"""Structured logging configuration for the CloudControl toolkit.

This module provides centralized logging setup with:
- Structured logging with JSON formatting option
- Log level configuration from environment
- Run correlation ids for CLI invocations
- Performance tracking
"""

import json
import logging
import logging.handlers
import os
import sys
import time
import uuid
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any, Dict, Optional

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_EXTRA_FIELDS = (
    "error_code",
    "error_details",
    "error_context",
    "run_id",
    "duration_ms",
    "operation",
    "scenario",
)


class StructuredFormatter(logging.Formatter):
    """Formatter that outputs structured JSON logs."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "logger": record.name,
            "level": record.levelname,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        for name in _EXTRA_FIELDS:
            if hasattr(record, name):
                log_data[name] = getattr(record, name)

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, default=str)


class RunLoggingAdapter(logging.LoggerAdapter):
    """Logging adapter that tags every record with the id of one CLI run."""

    def __init__(self, logger: logging.Logger, run_id: str | None = None):
        """Initialize adapter with a run ID."""
        self.run_id = run_id or str(uuid.uuid4())
        super().__init__(logger, {"run_id": self.run_id})

    def process(self, msg, kwargs):
        """Process log message to add the run ID."""
        if "extra" not in kwargs:
            kwargs["extra"] = {}
        kwargs["extra"]["run_id"] = self.run_id
        return msg, kwargs


class PerformanceLogger:
    """Logger for tracking operation durations."""

    def __init__(self, logger: logging.Logger, slow_threshold_ms: float = 5000.0):
        """Initialize performance logger."""
        self.logger = logger
        self.slow_threshold_ms = slow_threshold_ms

    @contextmanager
    def track_operation(
        self,
        operation: str,
        scenario: Optional[str] = None,
        extra: Optional[Dict[str, Any]] = None,
    ):
        """Context manager for tracking operation duration.

        Usage:
            with perf_logger.track_operation("gestalt_scan", scenario="fig4-family"):
                scan_fixed_points(game)
        """
        start_time = time.perf_counter()
        try:
            yield
        finally:
            duration_ms = (time.perf_counter() - start_time) * 1000

            log_data: Dict[str, Any] = {
                "operation": operation,
                "duration_ms": round(duration_ms, 2),
            }
            if scenario:
                log_data["scenario"] = scenario
            if extra:
                log_data.update(extra)

            self.logger.info(
                f"Operation '{operation}' completed in {duration_ms:.2f}ms",
                extra=log_data,
            )

            if duration_ms > self.slow_threshold_ms:
                self.logger.warning(
                    f"Slow operation detected: '{operation}' took {duration_ms:.2f}ms",
                    extra=log_data,
                )


def setup_logging(
    log_level: Optional[str] = None,
    log_format: Optional[str] = None,
    use_json: bool = False,
    log_file: Optional[str] = None,
) -> None:
    """Set up structured logging for the toolkit.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_format: Custom log format string
        use_json: Whether to use JSON formatting
        log_file: Optional log file path
    """
    if log_level is None:
        log_level = os.getenv("CLOUDCONTROL_LOG_LEVEL", "WARNING")

    numeric_level = getattr(logging, log_level.upper(), logging.WARNING)

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)

    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    if use_json:
        formatter: logging.Formatter = StructuredFormatter()
    else:
        formatter = logging.Formatter(log_format or DEFAULT_FORMAT)

    # Reports go to stdout, so logs stay on stderr
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=5,
        )
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    logging.getLogger("cloudcontrol").setLevel(numeric_level)

    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("numexpr").setLevel(logging.WARNING)


def get_logger(name: str, run_id: Optional[str] = None) -> logging.Logger | logging.LoggerAdapter:
    """Get a logger instance with optional run context.

    Args:
        name: Logger name (usually __name__)
        run_id: Optional run ID for correlation

    Returns:
        Logger instance with run context if provided
    """
    logger = logging.getLogger(name)

    if run_id:
        return RunLoggingAdapter(logger, run_id)

    return logger


perf_logger = PerformanceLogger(logging.getLogger("cloudcontrol.performance"))
