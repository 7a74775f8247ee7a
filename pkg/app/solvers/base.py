from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from app.models.milp import MilpProblem
from app.models.scenario import SolverOptions
from app.utils.exceptions import InvalidArgumentError
from app.utils.logs import ErrorLogger


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit"


@dataclass(slots=True, frozen=True)
class SolverResult:
    status: SolveStatus
    objective: float
    values: np.ndarray
    gap: float
    wall_time: float
    backend: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


class SolverBackend(ABC):
    """Load a MilpProblem, apply gap/time/seed options, report status and values."""

    name: str = "abstract"

    def __init__(self, logger: Optional[ErrorLogger] = None):
        self._logger = logger

    @property
    def logger(self) -> Optional[ErrorLogger]:
        return self._logger

    @abstractmethod
    def solve(self, problem: MilpProblem, options: SolverOptions) -> SolverResult:
        ...

    @staticmethod
    def row_bounds(problem: MilpProblem) -> tuple[np.ndarray, np.ndarray]:
        """Two-sided row bounds lo <= A·v <= hi from senses and rhs."""
        lo = np.where(problem.senses == "L", -np.inf, problem.rhs)
        hi = np.where(problem.senses == "G", np.inf, problem.rhs)
        return lo, hi


def get_backend(name: str, logger: Optional[ErrorLogger] = None) -> SolverBackend:
    from app.solvers.bruteforce import BruteForceBackend
    from app.solvers.highs import HighsBackend

    backends = {
        HighsBackend.name: HighsBackend,
        BruteForceBackend.name: BruteForceBackend,
    }
    backend = backends.get(name)
    if backend is None:
        raise InvalidArgumentError(f"unknown solver backend {name!r}; available: {sorted(backends)}")
    return backend(logger)
