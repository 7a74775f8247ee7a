from typing import Literal, Optional

from pydantic import Field, field_validator, model_validator

from app.models.atdm import BlaParams
from app.models.base import BaseModelSchema
from app.models.grid import NetworkModel
from app.models.masking import MaskingPolicy
from app.utils.config import SOLVER_BACKEND, SOLVER_GAP, SOLVER_TIME_LIMIT, SOLVER_THREADS, SOLVER_FEASIBILITY_TOL

SCHEMA_VERSION = 1

ExperimentKind = Literal["accuracy", "audit", "case_sweep", "band_sweep", "ppdc_sweep", "timing"]


class SolverOptions(BaseModelSchema):
    backend: str = SOLVER_BACKEND
    gap: float = Field(default=SOLVER_GAP, ge=0)
    time_limit: float = Field(default=SOLVER_TIME_LIMIT, gt=0)
    seed: int = 0
    threads: int = Field(default=SOLVER_THREADS, ge=1)
    feasibility_tol: float = Field(default=SOLVER_FEASIBILITY_TOL, gt=0)


class PpdcConfig(BaseModelSchema):
    """ADMM with decaying noise on the exchanged BLA powers."""
    phi: float = Field(default=0.0, ge=0.0, lt=1.0)
    rho: float = Field(default=0.01, gt=0.0)
    noise_variance: float = Field(default=10.0, ge=0.0)
    max_iterations: int = Field(default=400, ge=1)
    primal_tol: float = Field(default=1e-2, gt=0.0)
    dual_tol: float = Field(default=1e-2, gt=0.0)
    blow_up: float = Field(default=1e8, gt=0.0)
    seed: int = 0


class Scenario(BaseModelSchema):
    """A complete dispatch instance: public grid, private BLA models, policies and seeds."""
    schema_version: int = SCHEMA_VERSION
    name: str = "scenario"
    horizon: int = Field(default=24, ge=1)
    dt: float = Field(default=1.0, gt=0)
    network: NetworkModel
    blas: list[BlaParams] = Field(default_factory=list)
    masking: MaskingPolicy = Field(default_factory=MaskingPolicy)
    solver: SolverOptions = Field(default_factory=SolverOptions)
    seed: int = 0
    seeds: dict[str, int] = Field(default_factory=dict)

    @field_validator("schema_version")
    @classmethod
    def _known_version(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {value}, expected {SCHEMA_VERSION}")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "Scenario":
        problems = []
        ids = [p.id for p in self.blas]
        if len(set(ids)) != len(ids):
            problems.append("duplicate BLA ids")
        for params in self.blas:
            if params.horizon != self.horizon:
                problems.append(f"BLA {params.id} horizon {params.horizon} differs from scenario horizon {self.horizon}")
            if self.network.placement_of(params.id) is None:
                problems.append(f"BLA {params.id} has no placement in the network")
        placed = {p.bla_id for p in self.network.placements}
        for missing in sorted(placed - set(ids)):
            problems.append(f"placement references unknown BLA {missing}")
        if abs(self.network.dt - self.dt) > 1e-12:
            problems.append(f"network dt {self.network.dt} differs from scenario dt {self.dt}")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def bla(self, bla_id: str) -> BlaParams:
        return next(p for p in self.blas if p.id == bla_id)

    @property
    def bla_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.blas)


class ExperimentSpec(BaseModelSchema):
    """What to run and the sweep grids for it."""
    kind: ExperimentKind
    masking_seeds: list[int] = Field(default_factory=lambda: [1])
    # case sweep: one participation mask per case, True = BLA keeps its band;
    # None means all flexible, then one fewer flexible BLA per case
    tau_const: list[float] = Field(default_factory=lambda: [23.5, 24.0, 24.5], min_length=1)
    participation: Optional[list[list[bool]]] = None
    # band sweep
    tau_center: dict[str, float] = Field(default_factory=dict)
    delta_tau: float = Field(default=0.2, gt=0)
    band_multiplier: list[float] = Field(default_factory=lambda: [0.0, 1.0, 2.0, 4.0, 8.0], min_length=1)
    band_targets: Optional[list[str]] = None
    # ppdc sweep
    phi: list[float] = Field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8], min_length=1)
    ppdc: PpdcConfig = Field(default_factory=PpdcConfig)
    # audit
    attack_attempts: int = Field(default=5, ge=1)
    attack_horizon: int = Field(default=8, ge=3)
    # timing
    repeats: int = Field(default=1, ge=1)

    def participation_cases(self, count: int) -> list[list[bool]]:
        if self.participation is not None:
            return self.participation
        return [[i < keep for i in range(count)] for keep in range(count, -1, -1)]

    @field_validator("band_multiplier", "tau_const", "phi")
    @classmethod
    def _non_empty(cls, values: list[float]) -> list[float]:
        if not values:
            raise ValueError("grid must not be empty")
        return values

    @field_validator("participation")
    @classmethod
    def _some_cases(cls, values: Optional[list[list[bool]]]) -> Optional[list[list[bool]]]:
        if values is not None and not values:
            raise ValueError("participation must list at least one case")
        return values
