from app.dependencies.session import get_dso_session

__all__ = ["get_dso_session"]
