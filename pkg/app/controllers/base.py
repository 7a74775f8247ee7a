from abc import ABC
from dataclasses import asdict
from typing import NoReturn, Optional

from fastapi import HTTPException, status

from app.utils.exceptions import DispatchError
from app.utils.logs import ErrorLogger
from app.views.responses import ErrorBody

# HTTP status per domain error code; anything unlisted is a plain 400
STATUS_BY_CODE = {
    "INVALID_PLACEMENT": status.HTTP_404_NOT_FOUND,
    "INVALID_ARGUMENT": 422,
    "INVALID_MODEL": 422,
    "UNAVAILABLE": status.HTTP_409_CONFLICT,
    "SOLVER_ERROR": status.HTTP_502_BAD_GATEWAY,
}


class BaseController(ABC):
    """
    Abstract base class for all controller classes.

    Controllers handle HTTP request/response logic and delegate the
    dispatch and audit work to services.
    """

    def __init__(self, logger: Optional[ErrorLogger] = None):
        self._logger = logger

    @property
    def logger(self) -> Optional[ErrorLogger]:
        """Error logger instance."""
        return self._logger

    async def log_error(self, message: str, **kwargs) -> None:
        """Log an error if logger is available."""
        if self._logger:
            self._logger.error(message, **kwargs)

    async def log_info(self, message: str, **kwargs) -> None:
        """Log info if logger is available."""
        if self._logger:
            self._logger.info(message, **kwargs)

    def raise_http(self, exc: DispatchError) -> NoReturn:
        """Translate a domain error into an HTTPException carrying its code."""
        raise HTTPException(
            status_code=STATUS_BY_CODE.get(exc.code, status.HTTP_400_BAD_REQUEST),
            detail=asdict(ErrorBody(code=exc.code, message=exc.message)),
        ) from exc
