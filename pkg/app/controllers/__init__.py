from app.controllers.base import BaseController
from app.controllers.audit import AuditController, router as audit_router
from app.controllers.dispatch import DispatchController, router as dispatch_router

__all__ = [
    "BaseController",
    "AuditController",
    "audit_router",
    "DispatchController",
    "dispatch_router",
]
