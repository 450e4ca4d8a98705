"""
Error hierarchy for SIN Coevolve.

Every error carries a stable code and a details dict and renders to the
structured result shape used by the runner and CLI:
``{"success": False, "error": {"code", "message", "details"}}``.
"""

from typing import Any, Dict, Optional


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class SinError(Exception):
    """Base class for all library errors."""

    code = "SIN_ERROR"
    exit_code = EXIT_RUNTIME

    def __init__(self, message: str, code: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Render as a structured error result."""
        return {
            "success": False,
            "error": {
                "code": self.code,
                "message": self.message,
                "details": self.details
            }
        }


# geometry

class CurvatureMismatchError(SinError):
    code = "CURVATURE_MISMATCH"


class DomainError(SinError):
    code = "DOMAIN_VIOLATION"


class DimensionMismatchError(SinError):
    code = "DIMENSION_MISMATCH"


class EmptyInputError(SinError):
    code = "EMPTY_INPUT"


class ZeroWeightError(SinError):
    code = "ZERO_WEIGHTS"


# diffengine

class UnsupportedPrimitiveError(SinError):
    code = "UNSUPPORTED_PRIMITIVE"


class NonScalarLossError(SinError):
    code = "NON_SCALAR_LOSS"


class UntrackedLossError(SinError):
    code = "UNTRACKED_LOSS"


# curvature

class DisconnectedSupportError(SinError):
    code = "DISCONNECTED_SUPPORT"


class NonEdgeError(SinError):
    code = "NON_EDGE"


class GraphTooSmallError(SinError):
    code = "GRAPH_TOO_SMALL"


# data, config, checkpoints

class DataFormatError(SinError):
    code = "DATA_FORMAT"
    exit_code = EXIT_DATA


class CheckpointMismatchError(SinError):
    code = "CHECKPOINT_MISMATCH"
    exit_code = EXIT_DATA


class ConfigError(SinError):
    code = "INVALID_CONFIG"
    exit_code = EXIT_USAGE


# training

class DivergenceError(SinError):
    code = "DIVERGENCE"


def exit_code_for(exc: BaseException) -> int:
    """Map an exception onto the process exit code."""
    if isinstance(exc, SinError):
        return exc.exit_code
    return EXIT_RUNTIME
