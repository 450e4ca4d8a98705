"""
Centralized logging configuration for SIN Coevolve.

Provides structured logging with file rotation, multiple formats, and
environment-based configuration for long training and curvature runs.
"""

import logging
import logging.handlers
import json
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Dict, Any, Optional


# Record attributes copied into structured output when a call site sets them.
STRUCTURED_EXTRAS = (
    "run_id",
    "command",
    "component",
    "epoch",
    "interval",
    "side",
    "kappa",
    "loss",
    "cache_key",
    "cache_hit",
    "elapsed_ms",
)


class StructuredFormatter(logging.Formatter):
    """Custom formatter that outputs structured JSON logs."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as structured JSON."""
        log_entry = {
            "timestamp": datetime.fromtimestamp(record.created).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno
        }

        if record.exc_info:
            log_entry["exception"] = self.formatException(record.exc_info)

        for key in STRUCTURED_EXTRAS:
            if hasattr(record, key):
                log_entry[key] = getattr(record, key)

        return json.dumps(log_entry, default=str)


class ContextFilter(logging.Filter):
    """Filter to add context information to log records."""

    def __init__(self, context: Optional[Dict[str, Any]] = None):
        super().__init__()
        self.context = context or {}

    def filter(self, record: logging.LogRecord) -> bool:
        """Add context to log record."""
        for key, value in self.context.items():
            setattr(record, key, value)
        return True


def setup_logging(
    log_level: str = "INFO",
    log_dir: str = "logs",
    enable_console: bool = True,
    enable_file: bool = False,
    enable_json: bool = False,
    max_file_size: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5
) -> logging.Logger:
    """
    Setup centralized logging configuration.

    Console output goes to stderr so command tables on stdout stay
    machine-readable. File handlers are only attached when enabled.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_dir: Directory to store log files
        enable_console: Enable console logging
        enable_file: Enable rotating text and error logs
        enable_json: Enable structured JSON logging
        max_file_size: Maximum size of log files before rotation
        backup_count: Number of backup files to keep

    Returns:
        Configured root logger
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level.upper(), logging.INFO))
    root_logger.handlers.clear()

    line_format = "%(asctime)s | %(levelname)-8s | %(name)s:%(lineno)d | %(message)s"

    if enable_console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(logging.Formatter(line_format, datefmt="%Y-%m-%d %H:%M:%S"))
        root_logger.addHandler(console_handler)

    if enable_file or enable_json:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)

    if enable_file:
        file_handler = logging.handlers.RotatingFileHandler(
            log_path / "sin_coevolve.log",
            maxBytes=max_file_size,
            backupCount=backup_count
        )
        file_handler.setFormatter(logging.Formatter(line_format, datefmt="%Y-%m-%d %H:%M:%S"))
        root_logger.addHandler(file_handler)

        error_handler = logging.handlers.RotatingFileHandler(
            log_path / "sin_coevolve_errors.log",
            maxBytes=max_file_size,
            backupCount=backup_count
        )
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(logging.Formatter(
            line_format + "\n%(pathname)s:%(lineno)d in %(funcName)s()\n",
            datefmt="%Y-%m-%d %H:%M:%S"
        ))
        root_logger.addHandler(error_handler)

    if enable_json:
        json_handler = logging.handlers.RotatingFileHandler(
            log_path / "sin_coevolve_structured.jsonl",
            maxBytes=max_file_size,
            backupCount=backup_count
        )
        json_handler.setFormatter(StructuredFormatter())
        root_logger.addHandler(json_handler)

    return root_logger


def get_logger(name: str, context: Optional[Dict[str, Any]] = None) -> logging.Logger:
    """
    Get a logger with optional context.

    Args:
        name: Logger name (typically __name__)
        context: Optional context to add to all log records

    Returns:
        Configured logger with context
    """
    logger = logging.getLogger(name)

    if context and not any(
        isinstance(existing, ContextFilter) and existing.context == context
        for existing in logger.filters
    ):
        logger.addFilter(ContextFilter(context))

    return logger


def log_command(logger: logging.Logger, command: str, params: Dict[str, Any], run_id: Optional[str] = None) -> None:
    """Log the start of a CLI/runner command."""
    logger.info(
        f"Command: {command}",
        extra={
            "run_id": run_id,
            "command": command,
            "params": params
        }
    )


def log_command_result(
    logger: logging.Logger,
    command: str,
    elapsed_ms: float,
    success: bool,
    run_id: Optional[str] = None
) -> None:
    """Log command completion with timing."""
    level = logging.INFO if success else logging.ERROR
    logger.log(
        level,
        f"Command {command} ({'success' if success else 'error'}) in {elapsed_ms:.2f}ms",
        extra={
            "run_id": run_id,
            "command": command,
            "elapsed_ms": elapsed_ms,
            "success": success
        }
    )


def log_interval_step(
    logger: logging.Logger,
    epoch: int,
    interval: int,
    loss: float,
    kappa_u: float,
    kappa_i: float,
    run_id: Optional[str] = None
) -> None:
    """Log one optimisation step over an interval batch."""
    logger.debug(
        f"epoch {epoch} interval {interval}: loss={loss:.6f} kappa_u={kappa_u:.4f} kappa_i={kappa_i:.4f}",
        extra={
            "run_id": run_id,
            "epoch": epoch,
            "interval": interval,
            "loss": loss,
            "kappa": [kappa_u, kappa_i]
        }
    )


def log_cache_event(logger: logging.Logger, cache_key: str, hit: bool, run_id: Optional[str] = None) -> None:
    """Log cache hit/miss events."""
    logger.debug(
        f"Cache {'HIT' if hit else 'MISS'}: {cache_key}",
        extra={
            "run_id": run_id,
            "cache_key": cache_key,
            "cache_hit": hit
        }
    )


def log_curvature_computation(
    logger: logging.Logger,
    interval: Any,
    side: str,
    n_edges: int,
    kappa: float,
    elapsed_ms: float
) -> None:
    """Log an offline curvature computation for one interval and side."""
    logger.info(
        f"Curvature {side}@{interval}: {n_edges} edges, kappa_o={kappa:.4f} in {elapsed_ms:.2f}ms",
        extra={
            "interval": interval,
            "side": side,
            "kappa": kappa,
            "elapsed_ms": elapsed_ms
        }
    )


# Environment-based configuration
def configure_from_env() -> logging.Logger:
    """Configure logging from environment variables."""
    log_level = os.getenv("SIN_COEVOLVE_LOG_LEVEL", "INFO")
    log_dir = os.getenv("SIN_COEVOLVE_LOG_DIR", "logs")
    enable_console = os.getenv("SIN_COEVOLVE_LOG_CONSOLE", "true").lower() == "true"
    enable_file = os.getenv("SIN_COEVOLVE_LOG_FILE", "false").lower() == "true"
    enable_json = os.getenv("SIN_COEVOLVE_LOG_JSON", "false").lower() == "true"

    return setup_logging(
        log_level=log_level,
        log_dir=log_dir,
        enable_console=enable_console,
        enable_file=enable_file,
        enable_json=enable_json
    )


# Initialize logging on import
if not logging.getLogger().handlers:
    configure_from_env()
