from fastapi import Request

from app.services.session import DsoSessionService


async def get_dso_session(request: Request) -> DsoSessionService:
    """DSO session created by the application lifespan."""
    return request.app.state.dso_session
