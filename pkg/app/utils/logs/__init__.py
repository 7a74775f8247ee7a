from .errors import ErrorLogger, error_logger_context
from .dependencies import (
    get_error_logger_dependency,
    ErrorLoggerDep,
)

__all__ = [
    "ErrorLogger",
    "error_logger_context",
    "get_error_logger_dependency",
    "ErrorLoggerDep"
]
