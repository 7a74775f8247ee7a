from typing import Annotated, Optional

from fastapi import APIRouter, Depends
from starlette.concurrency import run_in_threadpool

from app.controllers.base import BaseController
from app.dependencies.session import get_dso_session
from app.models.session import MaskedBlaUpload
from app.services.session import DsoSessionService
from app.utils.exceptions import DispatchError
from app.utils.logs import ErrorLogger, ErrorLoggerDep
from app.views.responses import APIResponse


class DispatchController(BaseController):
    """Controller for the masked upload, solve and result exchange."""

    def __init__(self, session: DsoSessionService, logger: Optional[ErrorLogger] = None):
        super().__init__(logger)
        self._session = session

    async def upload(self, upload: MaskedBlaUpload) -> dict:
        async with self._session.lock:
            try:
                pending = self._session.accept(upload)
            except DispatchError as exc:
                await self.log_error("upload rejected", bla_id=upload.bla_id, code=exc.code)
                self.raise_http(exc)
        return {"accepted": upload.bla_id, "pending": pending}

    async def solve(self) -> dict:
        async with self._session.lock:
            try:
                result = await run_in_threadpool(self._session.solve)
            except DispatchError as exc:
                await self.log_error("solve failed", code=exc.code, detail=exc.message)
                self.raise_http(exc)
        return {"status": result.status.value, "objective": result.objective, "gap": result.gap}

    async def result_for(self, bla_id: str) -> dict:
        try:
            x_tilde, u = self._session.result_for(bla_id)
        except DispatchError as exc:
            self.raise_http(exc)
        return {"bla_id": bla_id, "x_tilde": x_tilde.tolist(), "u": u.tolist()}

    async def reset(self) -> dict:
        async with self._session.lock:
            self._session.reset()
        return {"pending": self._session.pending}


router = APIRouter(prefix="/dispatch", tags=["Dispatch"])

SessionDep = Annotated[DsoSessionService, Depends(get_dso_session)]


@router.post(
    "/uploads",
    summary="Upload masked BLA blocks",
    description="Accepts f1..f4 of one BLA. The schema admits nothing else.",
)
async def upload_masked_model(upload: MaskedBlaUpload, session: SessionDep, logger: ErrorLoggerDep):
    controller = DispatchController(session, logger)
    data = await controller.upload(upload)
    return APIResponse(data=data, message="Upload accepted")


@router.post("/solve", summary="Solve the masked dispatch problem")
async def solve_dispatch(session: SessionDep, logger: ErrorLoggerDep):
    """Requires an upload from every placed BLA."""
    controller = DispatchController(session, logger)
    data = await controller.solve()
    return APIResponse(data=data, message="Dispatch solved")


@router.get("/results/{bla_id}", summary="Masked result of one BLA")
async def get_result(bla_id: str, session: SessionDep, logger: ErrorLoggerDep):
    controller = DispatchController(session, logger)
    return APIResponse(data=await controller.result_for(bla_id))


@router.delete("/session", summary="Drop uploads and results")
async def reset_session(session: SessionDep, logger: ErrorLoggerDep):
    controller = DispatchController(session, logger)
    return APIResponse(data=await controller.reset(), message="Session reset")
