"""
Assembly of the plaintext (P0) and masked (P1) dispatch problems, solver
calls and extraction of named dispatch series.
"""
import time
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from app.models.atdm import CompactBla
from app.models.grid import GridBlock, NetworkModel
from app.models.masking import MaskedBla, MaskingKeys
from app.models.milp import MilpProblem, ProblemBuilder, Sense, identity
from app.models.scenario import Scenario, SolverOptions
from app.services.atdm import build_compact
from app.services.base import BaseService
from app.services.grid import build_grid_block, coupling_matrix
from app.services.masking import derive_key_seeds, generate_keys, mask, recover_state, verify_recovered
from app.solvers.base import SolverBackend, SolverResult, get_backend
from app.utils.exceptions import InvalidArgumentError, InvalidPlacementError, UnavailableError
from app.utils.logs import ErrorLogger
from app.views.reports import DispatchSolution, FeasibilityReport

DispatchMode = Literal["plaintext", "masked"]
BlaPayload = Union[CompactBla, MaskedBla]


def equilibrate_rows(*blocks: np.ndarray) -> np.ndarray:
    """Per-row factors scaling the concatenated coefficient blocks to unit inf-norm."""
    norms = np.max(np.abs(np.hstack(blocks)), axis=1)
    return np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)


def condense_rows(payload: MaskedBla) -> tuple[np.ndarray, np.ndarray]:
    """
    Rewrite the masked rows as an equivalent full-row-rank system.

    The duplicated rows make V·[F G H] rank deficient with rank rows/q, so
    they are dependent only up to rounding. The leading right singular
    vectors span the same row space; solving them for the pseudo-state and
    slack columns then gives [x̃; w] + K·u = c. Both steps are invertible row
    operations, so the solution set is unchanged and the residuals the
    solver sees no longer pass through V.

    Returns the coefficient block over (x̃, u, w) and its right-hand side.
    """
    T = payload.horizon
    M = np.hstack([payload.f1, payload.f2, payload.f3])
    rank = payload.f1.shape[0] // payload.duplication
    if rank != 3 * T:
        raise InvalidArgumentError(f"masked blocks of BLA {payload.bla_id} carry {rank} distinct rows, expected {3 * T}")
    U, sigma, Vt = np.linalg.svd(M, full_matrices=False)
    basis, rhs = Vt[:rank], (U[:, :rank].T @ payload.f4) / sigma[:rank]

    pivot = np.r_[0:T, 2 * T:4 * T]
    try:
        K = np.linalg.solve(basis[:, pivot], np.column_stack([basis[:, T:2 * T], rhs]))
    except np.linalg.LinAlgError as exc:
        raise InvalidArgumentError(f"masked blocks of BLA {payload.bla_id} do not determine x̃ and w") from exc
    condensed = np.zeros((rank, 4 * T))
    condensed[:, pivot] = np.eye(rank)
    condensed[:, T:2 * T] = K[:, :T]
    return condensed, K[:, T]


def _check_payloads(blas: Sequence[BlaPayload], mode: DispatchMode, T: int) -> None:
    expected = CompactBla if mode == "plaintext" else MaskedBla
    for payload in blas:
        if not isinstance(payload, expected):
            raise InvalidArgumentError(
                f"{mode} assembly expects {expected.__name__} payloads, got {type(payload).__name__}"
            )
        if payload.horizon != T:
            raise InvalidArgumentError(f"BLA {payload.bla_id} has horizon {payload.horizon}, grid block has {T}")
    if mode == "masked":
        for payload in blas:
            rows = payload.f1.shape[0]
            shapes = (payload.f2.shape, payload.f3.shape, payload.f4.shape)
            if shapes != ((rows, T), (rows, 2 * T), (rows,)):
                raise InvalidArgumentError(f"masked blocks of BLA {payload.bla_id} have inconsistent shapes")


def assemble(
    g: GridBlock,
    A: sp.csr_matrix,
    blas: Sequence[BlaPayload],
    mode: DispatchMode,
    equilibrate: bool = True,
    condense: bool = True,
) -> MilpProblem:
    """
    Grid block plus one BLA block per payload plus A·z + u = 0.

    The payload order must match the row blocks of A. Masked blocks are
    condensed to their row space, then row-equilibrated.
    """
    if mode not in ("plaintext", "masked"):
        raise InvalidArgumentError(f"unknown dispatch mode {mode!r}")
    T = g.periods
    _check_payloads(blas, mode, T)
    if A.shape != (len(blas) * T, g.num_variables):
        raise InvalidArgumentError(
            f"coupling matrix has shape {A.shape}, expected {(len(blas) * T, g.num_variables)}"
        )

    builder = ProblemBuilder.from_problem(g.problem)
    grid_cols = np.arange(g.num_variables, dtype=np.int64)
    I = identity(T)
    A = A.tocsr()
    for k, payload in enumerate(blas):
        bla_id = payload.bla_id
        if bla_id not in g.bla_slots:
            raise InvalidPlacementError(f"BLA {bla_id} has no slot in the grid block")
        A_k = A[k * T:(k + 1) * T]
        if not np.array_equal(np.sort(A_k.indices), np.sort(g.bla_slots[bla_id])):
            raise InvalidArgumentError(f"coupling rows {k * T}..{(k + 1) * T - 1} do not select the slot of {bla_id}")

        u = builder.add_variables(f"bla.{bla_id}.u", T)
        if mode == "plaintext":
            x = builder.add_variables(f"bla.{bla_id}.x", T, lower=payload.x_lo, upper=payload.x_hi)
            builder.add_rows(f"bla.{bla_id}.dynamics", [(payload.R, x), (payload.S, u)], Sense.EQ, payload.d)
        else:
            x_tilde = builder.add_variables(f"bla.{bla_id}.x_tilde", T)
            w = builder.add_variables(f"bla.{bla_id}.w", 2 * T, lower=0.0)
            if condense:
                M, rhs = condense_rows(payload)
            else:
                M, rhs = np.hstack([payload.f1, payload.f2, payload.f3]), payload.f4
            scale = equilibrate_rows(M) if equilibrate else np.ones(M.shape[0])
            M = scale[:, None] * M
            builder.add_rows(
                f"bla.{bla_id}.masked",
                [(M[:, :T], x_tilde), (M[:, T:2 * T], u), (M[:, 2 * T:], w)],
                Sense.EQ,
                scale * rhs,
            )
        builder.add_rows(f"bla.{bla_id}.coupling", [(A_k, grid_cols), (I, u)], Sense.EQ, 0.0)

    return builder.build(mode=mode, bla_ids=tuple(p.bla_id for p in blas))


def solve(
    p: MilpProblem,
    backend: Union[str, SolverBackend],
    opts: Optional[SolverOptions] = None,
    logger: Optional[ErrorLogger] = None,
) -> SolverResult:
    opts = opts or SolverOptions()
    if isinstance(backend, str):
        backend = get_backend(backend, logger)
    return backend.solve(p, opts)


def extract_dispatch(r: SolverResult, problem: MilpProblem) -> DispatchSolution:
    if not r.is_optimal:
        raise UnavailableError(f"no dispatch available: solver status is {r.status.value}")
    layout = problem.layout
    v = r.values
    series: dict[str, np.ndarray] = {}
    control: dict[str, np.ndarray] = {}
    state: dict[str, np.ndarray] = {}
    for name, cols in layout.groups.items():
        values = v[cols]
        if name.startswith("bla.") and name.endswith(".u"):
            control[name[4:-2]] = values
        elif name.startswith("bla.") and (name.endswith(".x") or name.endswith(".x_tilde")):
            state[name[4:].rsplit(".", 1)[0]] = values
        else:
            series[name] = values
    c_grid = float(layout.cost[layout.grid_cost_cols] @ v[layout.grid_cost_cols])
    c_om = float(layout.cost[layout.om_cost_cols] @ v[layout.om_cost_cols])
    return DispatchSolution(
        status=r.status.value,
        objective=float(r.objective),
        c_grid=c_grid,
        c_om=c_om,
        series=series,
        bla_control=control,
        bla_state=state,
        mode=layout.mode,
        gap=r.gap,
    )


def constraint_violation(problem: MilpProblem, values: np.ndarray) -> float:
    """Largest row or bound violation of `values`, recomputed without the solver."""
    lhs = problem.A @ values
    row = np.zeros(problem.num_rows)
    le, ge, eq = problem.senses == "L", problem.senses == "G", problem.senses == "E"
    row[le] = np.maximum(lhs[le] - problem.rhs[le], 0.0)
    row[ge] = np.maximum(problem.rhs[ge] - lhs[ge], 0.0)
    row[eq] = np.abs(lhs[eq] - problem.rhs[eq])
    bound = np.maximum(np.maximum(problem.lower - values, values - problem.upper), 0.0)
    return float(max(row.max(initial=0.0), bound.max(initial=0.0)))


def solve_uploads(
    network: NetworkModel,
    horizon: int,
    bla_ids: Sequence[str],
    uploads: dict[str, MaskedBla],
    opts: SolverOptions,
    logger: Optional[ErrorLogger] = None,
) -> tuple[MilpProblem, SolverResult]:
    """Build and solve P1 from a complete set of uploads, in `bla_ids` order."""
    missing = [bla_id for bla_id in bla_ids if bla_id not in uploads]
    if missing:
        raise UnavailableError(f"waiting for uploads from {', '.join(missing)}")
    block = build_grid_block(network, horizon)
    A = coupling_matrix(network, block, list(bla_ids))
    problem = assemble(block, A, [uploads[b] for b in bla_ids], "masked")
    return problem, solve(problem, opts.backend, opts, logger)


def resolve_key_seeds(scenario: Scenario, masking_seed: Optional[int] = None) -> dict[str, int]:
    """
    Per-BLA key seeds. Without an explicit masking seed the scenario seed is
    spawned and any per-BLA entry of `scenario.seeds` wins.
    """
    seed = scenario.seed if masking_seed is None else masking_seed
    derived = derive_key_seeds(seed, scenario.bla_ids)
    if masking_seed is None:
        derived.update({k: v for k, v in scenario.seeds.items() if k in derived})
    return derived


@dataclass(slots=True)
class DispatchRun:
    mode: str
    problem: MilpProblem
    result: SolverResult
    solution: Optional[DispatchSolution]
    modeling_seconds: float
    solving_seconds: float
    keys: dict[str, MaskingKeys] = field(default_factory=dict)
    recovered: dict[str, np.ndarray] = field(default_factory=dict)
    feasibility: dict[str, FeasibilityReport] = field(default_factory=dict)


class DispatchService(BaseService):
    """Monolithic NPPCC (plaintext) and PPCC (mask, solve, recover) pipelines."""

    def __init__(self, scenario: Scenario, logger: Optional[ErrorLogger] = None):
        super().__init__(logger)
        self.scenario = scenario

    def compacts(self) -> list[CompactBla]:
        return [build_compact(self.scenario.bla(bla_id)) for bla_id in self.scenario.bla_ids]

    def key_seeds(self, masking_seed: Optional[int] = None) -> dict[str, int]:
        return resolve_key_seeds(self.scenario, masking_seed)

    def _grid(self) -> tuple[GridBlock, sp.csr_matrix]:
        block = build_grid_block(self.scenario.network, self.scenario.horizon)
        return block, coupling_matrix(self.scenario.network, block, self.scenario.bla_ids)

    def build(self, mode: DispatchMode = "plaintext", masking_seed: Optional[int] = None) -> MilpProblem:
        """The P0 or P1 problem of the scenario, assembled but not solved."""
        compacts = self.compacts()
        payloads: list[BlaPayload] = list(compacts)
        if mode == "masked":
            seeds = self.key_seeds(masking_seed)
            payloads = [mask(c, generate_keys(c.horizon, seeds[c.bla_id], self.scenario.masking)) for c in compacts]
        block, A = self._grid()
        return assemble(block, A, payloads, mode)

    def _solve(self, problem: MilpProblem) -> tuple[SolverResult, float]:
        started = time.perf_counter()
        result = solve(problem, self.scenario.solver.backend, self.scenario.solver, self.logger)
        return result, time.perf_counter() - started

    def run_plaintext(self, compacts: Optional[list[CompactBla]] = None) -> DispatchRun:
        started = time.perf_counter()
        compacts = compacts if compacts is not None else self.compacts()
        block, A = self._grid()
        problem = assemble(block, A, compacts, "plaintext")
        modeling = time.perf_counter() - started
        result, solving = self._solve(problem)
        solution = extract_dispatch(result, problem) if result.is_optimal else None
        self.log_info("plaintext dispatch solved", status=result.status.value, objective=result.objective)
        return DispatchRun("plaintext", problem, result, solution, modeling, solving)

    def run_masked(
        self,
        masking_seed: Optional[int] = None,
        keys: Optional[dict[str, MaskingKeys]] = None,
        compacts: Optional[list[CompactBla]] = None,
    ) -> DispatchRun:
        started = time.perf_counter()
        compacts = compacts if compacts is not None else self.compacts()
        if keys is None:
            seeds = self.key_seeds(masking_seed)
            keys = {
                c.bla_id: generate_keys(c.horizon, seeds[c.bla_id], self.scenario.masking) for c in compacts
            }
        masked = [mask(c, keys[c.bla_id]) for c in compacts]
        block, A = self._grid()
        problem = assemble(block, A, masked, "masked")
        modeling = time.perf_counter() - started
        result, solving = self._solve(problem)
        run = DispatchRun("masked", problem, result, None, modeling, solving, keys=keys)
        if not result.is_optimal:
            self.log_error("masked dispatch not optimal", status=result.status.value)
            return run
        run.solution = extract_dispatch(result, problem)
        for c in compacts:
            x = recover_state(run.solution.bla_state[c.bla_id], keys[c.bla_id].W)
            run.recovered[c.bla_id] = x
            run.feasibility[c.bla_id] = verify_recovered(c, x, run.solution.bla_control[c.bla_id])
        self.log_info("masked dispatch solved", status=result.status.value, objective=result.objective)
        return run
