from typing import Literal, Optional

from fastapi import APIRouter, Query

from app.controllers.base import BaseController
from app.services.audit import count_inference
from app.utils.exceptions import DispatchError
from app.utils.logs import ErrorLogger, ErrorLoggerDep
from app.views.responses import APIResponse


class AuditController(BaseController):

    def __init__(self, logger: Optional[ErrorLogger] = None):
        super().__init__(logger)

    async def counts(self, T: int, M: int, scheme: str, duplication: int):
        try:
            return count_inference(T, M, scheme, duplication)
        except DispatchError as exc:
            self.raise_http(exc)


router = APIRouter(prefix="/audit", tags=["Audit"])


@router.get("/counts", summary="Equation and unknown counts of the inference system")
async def get_counts(
    logger: ErrorLoggerDep,
    T: int = Query(..., ge=1),
    M: int = Query(..., ge=1),
    scheme: Literal["full", "no_cet", "no_crt"] = "full",
    duplication: int = Query(2, ge=1),
):
    controller = AuditController(logger)
    return APIResponse(data=await controller.counts(T, M, scheme, duplication))
