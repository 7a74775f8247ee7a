import logging
import orjson
import sys

from contextlib import contextmanager
from typing import Iterator, Optional
from contextvars import ContextVar

from app.utils.config import LOG_LEVEL

_current_error_logger: ContextVar[Optional['ErrorLogger']] = ContextVar('current_error_logger', default=None)

_JSON_OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS


def _context(kwargs: dict) -> str:
    if not kwargs:
        return ""
    return f" | {orjson.dumps(kwargs, option=_JSON_OPTIONS, default=str).decode()}"


class ErrorLogger:
    """Logger for solver failures, protocol aborts and run diagnostics."""

    def __init__(self, name: str = "error", level: str = LOG_LEVEL):
        self.name = name
        self.logger = logging.getLogger(f"error.{name}")
        self.logger.setLevel(level)
        self.logger.handlers.clear()
        self.logger.propagate = False

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)

        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - '
            '%(module)s:%(funcName)s:%(lineno)d - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

    def info(self, message: str, **kwargs):
        self.logger.info(f"{message}{_context(kwargs)}", stacklevel=2)

    def warning(self, message: str, **kwargs):
        self.logger.warning(f"{message}{_context(kwargs)}", stacklevel=2)

    def error(self, message: str, **kwargs):
        self.logger.error(f"{message}{_context(kwargs)}", stacklevel=2)

    def debug(self, message: str, **kwargs):
        self.logger.debug(f"{message}{_context(kwargs)}", stacklevel=2)

    def exception(self, message: str, exc: Exception, **kwargs):
        """Log exception with full traceback."""
        error_data = {
            'error_type': type(exc).__name__,
            'error_message': str(exc),
            **kwargs
        }
        self.logger.error(f"{message}{_context(error_data)}", exc_info=exc, stacklevel=2)

    def log_solver_error(self, backend: str, error: Exception, **kwargs):
        self.exception(f"Solver error in backend {backend}", error, backend=backend, **kwargs)

    def log_protocol_error(self, actor: str, error: Exception, **kwargs):
        self.exception(f"Protocol error at {actor}", error, actor=actor, **kwargs)

    def log_key_error(self, bla_id: str, error: Exception, **kwargs):
        self.exception(f"Key generation failed for {bla_id}", error, bla_id=bla_id, **kwargs)


@contextmanager
def error_logger_context(name: str = "run") -> Iterator[ErrorLogger]:
    """Install a fresh ErrorLogger for the duration of a CLI run or experiment."""
    logger = ErrorLogger(name)
    token = _current_error_logger.set(logger)
    try:
        yield logger
    finally:
        _current_error_logger.reset(token)
