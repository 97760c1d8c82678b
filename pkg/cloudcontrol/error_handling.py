"""Error handling and monitoring for the CloudControl toolkit.

This module provides a centralized error handling system with:
- Error categorization and classification
- Exit codes for the command-line interface
- Structured logging and monitoring
- User-friendly error message generation
"""

import logging
import time
import traceback
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum, auto
from typing import Any, Dict, List, Optional

import pydantic

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_SCHEMA = 3
EXIT_NO_SELECTION = 4
EXIT_DIVERGENCE = 5
EXIT_ASSUMPTION = 6


class ErrorCategory(Enum):
    """Categories of errors raised by the solvers and the CLI."""

    SCHEMA = auto()  # Malformed or unreadable scenario
    ASSUMPTION = auto()  # Utility table violates A1-A4
    SELECTION = auto()  # Selection policy cannot rank the candidates
    DIVERGENCE = auto()  # Numerical integration blew up
    VALIDATION = auto()  # Out-of-range argument
    CONFIGURATION = auto()  # Runtime settings
    INTERNAL = auto()  # Unexpected errors


class ErrorSeverity(Enum):
    """Severity levels for errors."""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


@dataclass
class ErrorContext:
    """Context information for an error."""

    operation: Optional[str] = None
    prior: Optional[float] = None
    scenario: Optional[str] = None
    additional_info: Dict[str, Any] = field(default_factory=dict)


@dataclass
class ErrorMetrics:
    """Metrics for error tracking."""

    total_errors: int = 0
    errors_by_category: Dict[ErrorCategory, int] = field(default_factory=dict)
    errors_by_severity: Dict[ErrorSeverity, int] = field(default_factory=dict)
    last_error_time: Optional[datetime] = None

    def record_error(self, category: ErrorCategory, severity: ErrorSeverity):
        """Record an error occurrence."""
        self.total_errors += 1
        self.errors_by_category[category] = self.errors_by_category.get(category, 0) + 1
        self.errors_by_severity[severity] = self.errors_by_severity.get(severity, 0) + 1
        self.last_error_time = datetime.now()


class CloudControlError(Exception):
    """Base exception for toolkit errors with tracking information."""

    exit_code = EXIT_FAILURE

    def __init__(
        self,
        message: str,
        category: ErrorCategory,
        severity: ErrorSeverity = ErrorSeverity.MEDIUM,
        code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
        context: Optional[ErrorContext] = None,
    ):
        """Initialize error with tracking information.

        Args:
            message: Human-readable error message
            category: Error category for classification
            severity: Error severity level
            code: Optional error code, generated from the category when omitted
            details: Additional error details
            context: Error context information
        """
        super().__init__(message)
        self.message = message
        self.category = category
        self.severity = severity
        self.code = code or self._generate_code(category)
        self.details = details or {}
        self.context = context or ErrorContext()
        self.timestamp = datetime.now()

    def _generate_code(self, category: ErrorCategory) -> str:
        """Generate error code based on category."""
        codes = {
            ErrorCategory.SCHEMA: "SCHEMA_ERROR",
            ErrorCategory.ASSUMPTION: "ASSUMPTION_VIOLATION",
            ErrorCategory.SELECTION: "NO_SELECTION",
            ErrorCategory.DIVERGENCE: "DIVERGENCE",
            ErrorCategory.VALIDATION: "VALIDATION_ERROR",
            ErrorCategory.CONFIGURATION: "CONFIG_ERROR",
            ErrorCategory.INTERNAL: "INTERNAL_ERROR",
        }
        return codes.get(category, "UNKNOWN_ERROR")

    def to_dict(self) -> Dict[str, Any]:
        """Convert error to dictionary for logging and JSON reports."""
        return {
            "error": {
                "code": self.code,
                "message": self.message,
                "category": self.category.name,
                "severity": self.severity.value,
                "exit_code": self.exit_code,
                "details": self.details,
                "context": {
                    "operation": self.context.operation,
                    "prior": self.context.prior,
                    "scenario": self.context.scenario,
                },
                "timestamp": self.timestamp.isoformat(),
            }
        }


class ScenarioError(CloudControlError):
    """Scenario file is missing, malformed or fails schema validation."""

    exit_code = EXIT_SCHEMA

    def __init__(self, message: str, **kwargs):
        super().__init__(
            message=message,
            category=ErrorCategory.SCHEMA,
            severity=ErrorSeverity.MEDIUM,
            **kwargs,
        )


class AssumptionViolationError(CloudControlError):
    """Utility table violates one or more of the standing assumptions A1-A4."""

    exit_code = EXIT_ASSUMPTION

    def __init__(self, message: str, violations: Optional[List[str]] = None, **kwargs):
        self.violations = list(violations or [])
        details = kwargs.pop("details", {}) or {}
        details.setdefault("violations", self.violations)
        super().__init__(
            message=message,
            category=ErrorCategory.ASSUMPTION,
            severity=ErrorSeverity.MEDIUM,
            details=details,
            **kwargs,
        )


class NoSelectionError(CloudControlError):
    """The selection policy cannot single out one equilibrium."""

    exit_code = EXIT_NO_SELECTION

    def __init__(
        self,
        message: str,
        candidates: Optional[List[str]] = None,
        prior: Optional[float] = None,
        **kwargs,
    ):
        self.candidates = list(candidates or [])
        self.prior = prior
        details = kwargs.pop("details", {}) or {}
        details.setdefault("candidates", self.candidates)
        details.setdefault("prior", prior)
        super().__init__(
            message=message,
            category=ErrorCategory.SELECTION,
            severity=ErrorSeverity.MEDIUM,
            details=details,
            **kwargs,
        )
        if prior is not None and self.context.prior is None:
            self.context.prior = prior


class DivergenceError(CloudControlError):
    """Vehicle trajectory left the divergence bound."""

    exit_code = EXIT_DIVERGENCE

    def __init__(
        self,
        message: str,
        step: Optional[int] = None,
        time: Optional[float] = None,
        norm: Optional[float] = None,
        **kwargs,
    ):
        self.step = step
        self.time = time
        self.norm = norm
        details = kwargs.pop("details", {}) or {}
        details.update({"step": step, "time": time, "norm": norm})
        super().__init__(
            message=message,
            category=ErrorCategory.DIVERGENCE,
            severity=ErrorSeverity.HIGH,
            details=details,
            **kwargs,
        )


class ValidationError(CloudControlError):
    """Input validation errors."""

    def __init__(self, message: str, **kwargs):
        super().__init__(
            message=message,
            category=ErrorCategory.VALIDATION,
            severity=ErrorSeverity.LOW,
            **kwargs,
        )


class ConfigurationError(CloudControlError):
    """Runtime configuration errors."""

    def __init__(self, message: str, **kwargs):
        super().__init__(
            message=message,
            category=ErrorCategory.CONFIGURATION,
            severity=ErrorSeverity.HIGH,
            **kwargs,
        )


class InternalError(CloudControlError):
    """Unexpected errors."""

    def __init__(self, message: str, **kwargs):
        super().__init__(
            message=message,
            category=ErrorCategory.INTERNAL,
            severity=ErrorSeverity.CRITICAL,
            **kwargs,
        )


class ErrorHandler:
    """Central error handler with monitoring and logging capabilities."""

    def __init__(self):
        """Initialize error handler with metrics tracking."""
        self.metrics = ErrorMetrics()
        self._error_history: List[CloudControlError] = []
        self._max_history_size = 1000
        self._start_time = time.time()

    def handle_error(
        self,
        error: Exception,
        context: Optional[ErrorContext] = None,
        reraise: bool = True,
    ) -> Optional[CloudControlError]:
        """Handle an error with logging and monitoring.

        Args:
            error: The exception to handle
            context: Optional error context
            reraise: Whether to raise the converted error after handling

        Returns:
            CloudControlError instance when reraise is False

        Raises:
            CloudControlError: The converted error if reraise=True
        """
        if isinstance(error, CloudControlError):
            cc_error = error
            if context:
                cc_error.context = context
        else:
            cc_error = self._convert_error(error, context)

        self.metrics.record_error(cc_error.category, cc_error.severity)
        self._add_to_history(cc_error)
        self._log_error(cc_error)

        if reraise:
            if cc_error is error:
                raise cc_error
            raise cc_error from error

        return cc_error

    def _convert_error(
        self, error: Exception, context: Optional[ErrorContext] = None
    ) -> CloudControlError:
        """Convert standard and pydantic exceptions to CloudControlError instances."""
        error_message = str(error)
        error_type = type(error).__name__

        logger.debug(f"Full error details: {error_type}: {error_message}\n{traceback.format_exc()}")

        if isinstance(error, pydantic.ValidationError):
            return ScenarioError(
                f"Scenario does not match the schema: {error_message}",
                details={"errors": error.errors(include_url=False)},
                context=context,
            )
        elif isinstance(error, FileNotFoundError):
            return ScenarioError(
                f"File not found: {error_message}",
                context=context,
            )
        elif isinstance(error, (ValueError, TypeError)):
            return ValidationError(
                f"Invalid input: {error_message}",
                context=context,
            )
        else:
            return InternalError(
                f"Unexpected error: {error_message}",
                details={"type": error_type},
                context=context,
            )

    def _add_to_history(self, error: CloudControlError):
        """Add error to history with size limit."""
        self._error_history.append(error)
        if len(self._error_history) > self._max_history_size:
            self._error_history.pop(0)

    def _log_error(self, error: CloudControlError):
        """Log error with a level derived from its severity."""
        log_levels = {
            ErrorSeverity.LOW: logging.INFO,
            ErrorSeverity.MEDIUM: logging.WARNING,
            ErrorSeverity.HIGH: logging.ERROR,
            ErrorSeverity.CRITICAL: logging.CRITICAL,
        }

        level = log_levels.get(error.severity, logging.ERROR)
        logger.log(
            level,
            f"[{error.category.name}] {error.message}",
            extra={
                "error_code": error.code,
                "error_details": error.details,
                "error_context": {
                    "operation": error.context.operation,
                    "prior": error.context.prior,
                    "scenario": error.context.scenario,
                },
            },
        )

    def get_metrics(self) -> Dict[str, Any]:
        """Get current error metrics."""
        uptime = time.time() - self._start_time
        return {
            "total_errors": self.metrics.total_errors,
            "errors_by_category": {
                cat.name: count for cat, count in self.metrics.errors_by_category.items()
            },
            "errors_by_severity": {
                sev.value: count for sev, count in self.metrics.errors_by_severity.items()
            },
            "last_error_time": (
                self.metrics.last_error_time.isoformat() if self.metrics.last_error_time else None
            ),
            "uptime_seconds": int(uptime),
        }

    def get_recent_errors(self, limit: int = 10) -> List[Dict[str, Any]]:
        """Get recent errors from history, newest first."""
        recent = self._error_history[-limit:]
        return [error.to_dict() for error in reversed(recent)]

    def clear_metrics(self):
        """Clear error metrics (useful for testing)."""
        self.metrics = ErrorMetrics()
        self._error_history.clear()

    @contextmanager
    def error_context(self, **context_kwargs):
        """Context manager converting anything raised inside into a CloudControlError.

        A CloudControlError keeps the context it was raised with; only its
        empty fields are filled from this block.

        Usage:
            with error_handler.error_context(operation="gestalt", scenario="fig4-family"):
                scan_fixed_points(game)
        """
        context = ErrorContext(**context_kwargs)
        try:
            yield context
        except CloudControlError as e:
            self.handle_error(e, context=_merge_contexts(e.context, context))
        except Exception as e:
            self.handle_error(e, context=context)


def _merge_contexts(own: ErrorContext, outer: ErrorContext) -> ErrorContext:
    return ErrorContext(
        operation=own.operation or outer.operation,
        prior=own.prior if own.prior is not None else outer.prior,
        scenario=own.scenario or outer.scenario,
        additional_info={**outer.additional_info, **own.additional_info},
    )


# Global error handler instance
error_handler = ErrorHandler()


def format_user_error(error: CloudControlError) -> str:
    """Format error for display on stderr.

    Args:
        error: The CloudControlError to format

    Returns:
        Message followed by a category-specific hint
    """
    message = error.message

    if error.context.scenario:
        message = f"{message} (Scenario: {error.context.scenario})"
    if error.context.prior is not None:
        message = f"{message} (p = {error.context.prior:g})"

    suggestions = {
        ErrorCategory.SCHEMA: "Check the scenario file against the documented schema.",
        ErrorCategory.ASSUMPTION: "Adjust the utility table so that assumptions A1-A4 hold.",
        ErrorCategory.SELECTION: "Use the enumerate policy to inspect every candidate equilibrium.",
        ErrorCategory.DIVERGENCE: "Reduce the step size, the horizon, or the attacker offset.",
        ErrorCategory.VALIDATION: "Please check the arguments and try again.",
        ErrorCategory.CONFIGURATION: "Check CLOUDCONTROL_LOG_LEVEL and the .env file.",
        ErrorCategory.INTERNAL: "An unexpected error occurred. Re-run with --log-level DEBUG.",
    }

    suggestion = suggestions.get(error.category)
    if suggestion:
        message = f"{message}\n\n{suggestion}"

    return message
