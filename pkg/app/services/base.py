from abc import ABC
from typing import Optional

from app.utils.logs import ErrorLogger


class BaseService(ABC):
    """
    Abstract base class for orchestrating services.

    Services combine the numeric kernels into a workflow (dispatch runs,
    experiments, DSO sessions) and report what they did through the
    optional logger.
    """

    def __init__(self, logger: Optional[ErrorLogger] = None):
        self._logger = logger

    @property
    def logger(self) -> Optional[ErrorLogger]:
        """Error logger instance."""
        return self._logger

    def log_error(self, message: str, **kwargs) -> None:
        """Log an error if logger is available."""
        if self._logger:
            self._logger.error(message, **kwargs)

    def log_info(self, message: str, **kwargs) -> None:
        """Log info if logger is available."""
        if self._logger:
            self._logger.info(message, **kwargs)
