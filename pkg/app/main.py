from contextlib import asynccontextmanager
from typing import Optional

import uvicorn
from fastapi import FastAPI
from starlette.middleware.cors import CORSMiddleware

from app.controllers.audit import router as audit_router
from app.controllers.dispatch import router as dispatch_router
from app.models.scenario import Scenario
from app.services.scenario import load_scenario
from app.services.session import DsoSessionService
from app.utils.config import DSO_HOST, DSO_PORT, SCENARIO_PATH
from app.utils.logs import ErrorLogger
from app.utils.logs.middleware import LoggingMiddleware
from app.views.responses import OrjsonResponse


def create_app(scenario: Optional[Scenario] = None) -> FastAPI:
    """
    DSO service for one scenario. Without an explicit scenario the file at
    SCENARIO_PATH is loaded when the application starts.
    """

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        logger = ErrorLogger("dso")
        loaded = scenario or load_scenario(SCENARIO_PATH)
        app.state.dso_session = DsoSessionService(loaded, logger)
        logger.info("DSO session ready", scenario=loaded.name, blas=list(loaded.bla_ids))
        yield

    app = FastAPI(lifespan=lifespan, default_response_class=OrjsonResponse)
    app.include_router(dispatch_router)
    app.include_router(audit_router)

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"]
    )
    app.add_middleware(LoggingMiddleware)

    @app.get("/health", tags=["Health"])
    async def health_check():
        """Health check endpoint for load balancers and monitoring."""
        return {"status": "healthy"}

    return app


app: FastAPI = create_app()


if __name__ == "__main__":
    uvicorn.run(
        app="app.main:app",
        host=DSO_HOST,
        port=DSO_PORT,
        log_level="info"
    )
