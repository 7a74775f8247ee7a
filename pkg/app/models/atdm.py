from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from pydantic import Field, model_validator

from app.models.base import BaseModelSchema


class ZoneAggregation(BaseModelSchema):
    """Zone weights and per-zone temperature series behind one aggregate temperature."""
    xi: list[float] = Field(..., min_length=1)
    zone_temps: list[list[float]] = Field(..., min_length=1)

    def findings(self) -> list[str]:
        problems = []
        if len(self.xi) != len(self.zone_temps):
            problems.append(f"{len(self.xi)} weights for {len(self.zone_temps)} zones")
        if any(w < 0 for w in self.xi):
            problems.append("zone weights must be nonnegative")
        if abs(sum(self.xi) - 1.0) > 1e-12:
            problems.append(f"zone weights sum to {sum(self.xi)!r}, expected 1")
        if len({len(series) for series in self.zone_temps}) > 1:
            problems.append("zone temperature series differ in length")
        return problems

    @model_validator(mode="after")
    def _check_weights(self) -> "ZoneAggregation":
        problems = self.findings()
        if problems:
            raise ValueError("; ".join(problems))
        return self


class BlaParams(BaseModelSchema):
    """
    Private aggregate thermal dynamic model of one BLA.

    History is ordered oldest first: hist_x = [x^{1-M}, ..., x^0] and likewise
    hist_u. A scalar gamma is broadcast over the horizon.
    """
    id: str = Field(..., min_length=1)
    horizon: int
    order: int
    alpha: list[float]
    beta: list[float]
    gamma: list[float]
    temp_hi: float
    temp_lo: float
    hist_x: list[float] = Field(default_factory=list)
    hist_u: list[float] = Field(default_factory=list)
    zones: Optional[ZoneAggregation] = None

    @model_validator(mode="before")
    @classmethod
    def _broadcast_gamma(cls, data: Any) -> Any:
        if isinstance(data, dict) and isinstance(data.get("gamma"), (int, float)):
            data = {**data, "gamma": [float(data["gamma"])] * int(data.get("horizon", 0))}
        return data

    def findings(self) -> list[str]:
        T, M = self.horizon, self.order
        problems = []
        if T < 1:
            problems.append("horizon T must be at least 1")
        if M < 1:
            problems.append("order M must be at least 1")
        if T < M + 2:
            problems.append(
                f"horizon T={T} must satisfy T >= M+2={M + 2} for the constraint extension to stay under-determined"
            )
        if self.temp_lo > self.temp_hi:
            problems.append(f"temp_lo {self.temp_lo} exceeds temp_hi {self.temp_hi}")
        expected = {"alpha": M, "beta": M + 1, "gamma": T, "hist_x": M, "hist_u": M}
        for name, size in expected.items():
            if len(getattr(self, name)) != size:
                problems.append(f"{name} has length {len(getattr(self, name))}, expected {size}")
        return problems

    @model_validator(mode="after")
    def _check_invariants(self) -> "BlaParams":
        problems = self.findings()
        if problems:
            raise ValueError("; ".join(problems))
        return self


@dataclass(slots=True, frozen=True)
class CompactBla:
    """Matrix form R·x + S·u = d, x_lo <= x <= x_hi of one BLA."""
    bla_id: str
    order: int
    R: np.ndarray
    S: np.ndarray
    d: np.ndarray
    x_hi: float
    x_lo: float

    @property
    def horizon(self) -> int:
        return self.d.shape[0]
