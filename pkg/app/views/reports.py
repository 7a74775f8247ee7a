"""
Report objects returned by the kernels and experiments.

Reports are plain slotted dataclasses so that OrjsonResponse and the CLI
writers can serialize them directly (numpy arrays via OPT_SERIALIZE_NUMPY).
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np

Verdict = Literal["under_determined", "over_determined", "square"]


@dataclass(slots=True)
class ValidationReport:
    passed: bool
    findings: list[str] = field(default_factory=list)


@dataclass(slots=True)
class FeasibilityReport:
    bla_id: str
    residual_inf: float
    bound_violation: float
    worst_residual_period: int
    worst_bound_period: int
    threshold: float
    passed: bool
    # set when the check could not run, e.g. on a shape mismatch
    finding: Optional[str] = None


@dataclass(slots=True)
class CountReport:
    scheme: str
    T: int
    M: int
    duplication: int
    equations: int
    unknowns: int
    verdict: Verdict
    inventory: dict[str, int] = field(default_factory=dict)

    @property
    def inventory_total(self) -> int:
        return sum(self.inventory.values())


@dataclass(slots=True)
class AttackReport:
    """
    Outcome of the inference attack on one uploaded model.

    Distances are relative Frobenius errors. S and d are each compared after
    their best scalar alignment; R has a unit diagonal and is compared as is.
    """
    scheme: str
    residual: float
    r_error: float
    s_error: float
    d_error: float
    attempts: int
    success: bool
    masked_rank: int
    masked_rows: int
    attempt_residuals: list[float] = field(default_factory=list)
    attempt_r_errors: list[float] = field(default_factory=list)
    attempt_s_errors: list[float] = field(default_factory=list)
    attempt_successes: list[bool] = field(default_factory=list)
    attempt_iterations: list[int] = field(default_factory=list)
    # structured fit to the row space of the upload, evaluated once
    structured_residual: float = float("nan")
    structured_r_error: float = float("nan")
    structured_s_error: float = float("nan")
    structured_success: bool = False


@dataclass(slots=True)
class MaskingDistance:
    max_abs_correlation: float
    original_range: tuple[float, float]
    masked_range: tuple[float, float]
    heatmap_original: Optional[np.ndarray] = None
    heatmap_masked: Optional[np.ndarray] = None


@dataclass(slots=True)
class LeakageMatch:
    message_index: int
    tag: str
    field: str
    secret: str
    kind: Literal["row", "value"]


@dataclass(slots=True)
class LeakageReport:
    messages_scanned: int
    matches: list[LeakageMatch] = field(default_factory=list)
    observers: Optional[list[str]] = None

    @property
    def clean(self) -> bool:
        return not self.matches


@dataclass(slots=True)
class DispatchSolution:
    status: str
    objective: float
    c_grid: float
    c_om: float
    series: dict[str, np.ndarray] = field(default_factory=dict)
    bla_control: dict[str, np.ndarray] = field(default_factory=dict)
    bla_state: dict[str, np.ndarray] = field(default_factory=dict)
    mode: str = "plaintext"
    gap: float = 0.0


@dataclass(slots=True)
class PpdcResult:
    converged: bool
    iterations: int
    cost: float
    loss_percent: float
    reference_cost: float
    phi: float
    diverged: bool = False
    # False when no grid dispatch accommodates the final powers
    accommodated: bool = True
    primal_residuals: list[float] = field(default_factory=list)
    dual_residuals: list[float] = field(default_factory=list)
    binaries_fixed_from: str = "nppcc"


@dataclass(slots=True)
class ReportBundle:
    kind: str
    scenario_digest: str
    seeds: dict[str, int]
    files: list[Path] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)
    failed: bool = False
    data: dict = field(default_factory=dict)


@dataclass(slots=True)
class ControlExposure:
    """What masking u with its own map would reveal once that map must be public."""
    bla_id: str
    recovery_error: float
    exposed: bool
