"""DSO side of the upload / solve / fetch exchange behind the HTTP service."""
import asyncio
from typing import Optional

import numpy as np

from app.models.masking import MaskedBla
from app.models.milp import MilpProblem
from app.models.scenario import Scenario
from app.models.session import MaskedBlaUpload
from app.services.base import BaseService
from app.services.dispatch import extract_dispatch, solve_uploads
from app.solvers.base import SolverResult
from app.utils.exceptions import InvalidArgumentError, InvalidPlacementError, SolverError, UnavailableError
from app.utils.logs import ErrorLogger
from app.views.reports import DispatchSolution


class DsoSessionService(BaseService):
    """
    Holds the uploads of one dispatch round.

    The service only ever sees the masked blocks; the public network and
    the placed BLA ids come from the scenario it was started with.
    """

    def __init__(self, scenario: Scenario, logger: Optional[ErrorLogger] = None):
        super().__init__(logger)
        self.network = scenario.network
        self.horizon = scenario.horizon
        self.bla_ids = scenario.bla_ids
        self.solver = scenario.solver
        self.lock = asyncio.Lock()
        self.uploads: dict[str, MaskedBla] = {}
        self.problem: Optional[MilpProblem] = None
        self.result: Optional[SolverResult] = None
        self.solution: Optional[DispatchSolution] = None

    @property
    def pending(self) -> list[str]:
        return [bla_id for bla_id in self.bla_ids if bla_id not in self.uploads]

    def accept(self, upload: MaskedBlaUpload) -> list[str]:
        if upload.bla_id not in self.bla_ids:
            raise InvalidPlacementError(f"BLA {upload.bla_id} is not placed in this network")
        T = self.horizon
        rows = 3 * upload.duplication * T
        masked = MaskedBla(
            bla_id=upload.bla_id,
            f1=np.asarray(upload.f1, dtype=float),
            f2=np.asarray(upload.f2, dtype=float),
            f3=np.asarray(upload.f3, dtype=float),
            f4=np.asarray(upload.f4, dtype=float),
            duplication=upload.duplication,
        )
        expected = ((rows, T), (rows, T), (rows, 2 * T), (rows,))
        shapes = (masked.f1.shape, masked.f2.shape, masked.f3.shape, masked.f4.shape)
        if shapes != expected:
            raise InvalidArgumentError(f"blocks of {upload.bla_id} have shapes {shapes}, expected {expected}")
        self.uploads[upload.bla_id] = masked
        # a new upload invalidates any earlier solve
        self.problem = self.result = self.solution = None
        self.log_info("upload accepted", bla_id=upload.bla_id, pending=self.pending)
        return self.pending

    def solve(self) -> SolverResult:
        self.problem, self.result = solve_uploads(
            self.network, self.horizon, self.bla_ids, self.uploads, self.solver, self.logger
        )
        if not self.result.is_optimal:
            self.log_error("masked dispatch not optimal", status=self.result.status.value)
            raise SolverError(f"masked dispatch ended with status {self.result.status.value}")
        self.solution = extract_dispatch(self.result, self.problem)
        return self.result

    def result_for(self, bla_id: str) -> tuple[np.ndarray, np.ndarray]:
        if bla_id not in self.bla_ids:
            raise InvalidPlacementError(f"BLA {bla_id} is not placed in this network")
        if self.solution is None:
            raise UnavailableError("no dispatch has been solved in this session")
        return self.solution.bla_state[bla_id], self.solution.bla_control[bla_id]

    def reset(self) -> None:
        self.uploads.clear()
        self.problem = self.result = self.solution = None
