from app.views.responses import OrjsonResponse, APIResponse, ErrorBody
from app.views.reports import (
    ValidationReport,
    FeasibilityReport,
    CountReport,
    AttackReport,
    MaskingDistance,
    LeakageMatch,
    LeakageReport,
    DispatchSolution,
    PpdcResult,
    ReportBundle,
    ControlExposure,
)

__all__ = [
    "OrjsonResponse",
    "APIResponse",
    "ErrorBody",
    "ValidationReport",
    "FeasibilityReport",
    "CountReport",
    "AttackReport",
    "MaskingDistance",
    "LeakageMatch",
    "LeakageReport",
    "DispatchSolution",
    "PpdcResult",
    "ReportBundle",
    "ControlExposure",
]
