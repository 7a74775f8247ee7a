from typing import Annotated
from fastapi import Depends

from .errors import ErrorLogger, _current_error_logger


def get_error_logger_dependency() -> ErrorLogger:
    """
    Dependency for ErrorLogger.
    Reuses the logger installed by LoggingMiddleware, or creates one
    when the route is called outside the middleware (tests).
    """
    return _current_error_logger.get() or ErrorLogger("dso")


ErrorLoggerDep = Annotated[ErrorLogger, Depends(get_error_logger_dependency)]
