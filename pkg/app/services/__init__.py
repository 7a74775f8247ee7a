from app.services.base import BaseService

__all__ = [
    "BaseService",
]
