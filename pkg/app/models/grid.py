from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from pydantic import Field

from app.models.base import BaseModelSchema
from app.models.milp import MilpProblem

# Series fields accept either one value (broadcast over the horizon) or T values.


class Bus(BaseModelSchema):
    id: int
    v_min: float = 0.95
    v_max: float = 1.05
    p_load: list[float] = Field(default_factory=lambda: [0.0])
    q_load: list[float] = Field(default_factory=lambda: [0.0])


class Branch(BaseModelSchema):
    from_bus: int
    to_bus: int
    r: float
    x: float
    p_max: float


class TieLine(BaseModelSchema):
    bus: int
    p_max: list[float]
    buy_price: list[float]
    sell_price: list[float]


class Battery(BaseModelSchema):
    bus: int
    p_chr_max: float
    p_dis_max: float
    q_max: float = 0.0
    eta_chr: float = 0.95
    eta_dis: float = 0.95
    sigma: float = 0.001
    e_max: float
    e_min: float = 0.0
    e_init: float
    e_terminal: Optional[float] = None
    cost: float = 0.0


class Renewable(BaseModelSchema):
    bus: int
    p_max: list[float]
    q_max: list[float] = Field(default_factory=lambda: [0.0])
    cost: float = 0.0


class BlaPlacement(BaseModelSchema):
    bus: int
    bla_id: str


class NetworkModel(BaseModelSchema):
    """Public grid data the DSO owns: everything in the constraint set Z."""
    buses: list[Bus] = Field(..., min_length=1)
    branches: list[Branch] = Field(default_factory=list)
    tie_line: TieLine
    batteries: list[Battery] = Field(default_factory=list)
    renewables: list[Renewable] = Field(default_factory=list)
    placements: list[BlaPlacement] = Field(default_factory=list)
    v0: float = 1.0
    dt: float = Field(default=1.0, gt=0)
    base_kva: float = Field(default=10000.0, gt=0)

    def placement_of(self, bla_id: str) -> Optional[BlaPlacement]:
        return next((p for p in self.placements if p.bla_id == bla_id), None)


@dataclass(slots=True, frozen=True)
class GridBlock:
    """Grid-side variables, constraints and cost (the set Z and vector c) for one horizon."""
    problem: MilpProblem
    periods: int
    bla_slots: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def num_variables(self) -> int:
        return self.problem.num_variables
