"""
Response wrappers of the DSO service, serialized with orjson.

- APIResponse: success wrapper around endpoint data
- ErrorBody: the `detail` of every domain error, carrying its code
"""
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Optional

import orjson
from starlette.responses import JSONResponse


class OrjsonResponse(JSONResponse):
    """JSON response rendered by orjson; numpy arrays and dataclasses pass straight through."""
    media_type = "application/json"

    def render(self, content: Any) -> bytes:
        return orjson.dumps(
            content,
            option=orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_UTC_Z | orjson.OPT_SERIALIZE_DATACLASS
        )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(slots=True)
class APIResponse:
    """Standard API response wrapper.

    Usage:
        return APIResponse(data={"pending": ["BLA2"]}, message="Upload accepted")
    """
    success: bool = True
    data: Any = None
    message: Optional[str] = None
    timestamp: str = field(default_factory=_now)


@dataclass(slots=True)
class ErrorBody:
    """Structured error information; `code` is the upper-snake domain error code."""
    code: str
    message: str
    path: Optional[str] = None
    method: Optional[str] = None
