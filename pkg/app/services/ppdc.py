"""
Distributed baseline: ADMM on the coupling A·z + u = 0 with decaying noise
on the powers each BLA reports back to the DSO.

The MILP binaries are fixed at the plaintext incumbent first, so ADMM runs
on the remaining continuous problem. The DSO step is a QP over the grid
variables, each BLA step a QP over its own (x, u).
"""
from dataclasses import dataclass
from typing import Optional

import cvxpy as cp
from cvxpy.error import SolverError as CvxpySolverError
import numpy as np
import scipy.sparse as sp

from app.models.atdm import CompactBla
from app.models.grid import GridBlock
from app.models.milp import MilpProblem, ProblemBuilder
from app.models.scenario import PpdcConfig, Scenario
from app.services.base import BaseService
from app.services.dispatch import DispatchRun, DispatchService, solve
from app.services.grid import build_grid_block, coupling_matrix
from app.utils.exceptions import SolverError, UnavailableError, UndefinedReferenceError
from app.utils.logs import ErrorLogger
from app.views.reports import PpdcResult

_ACCEPTED = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)


def optimality_loss(c_ppdc: float, c_ppcc: float) -> float:
    """|C_ppdc - C_ppcc| / |C_ppcc| in percent."""
    if c_ppcc == 0:
        raise UndefinedReferenceError("optimality loss is undefined for a zero reference cost")
    return abs((c_ppdc - c_ppcc) / c_ppcc) * 100.0


def _finite_bounds(z: cp.Variable, lower: np.ndarray, upper: np.ndarray) -> list:
    constraints = []
    lo, hi = np.isfinite(lower), np.isfinite(upper)
    if lo.any():
        constraints.append(z[np.flatnonzero(lo)] >= lower[lo])
    if hi.any():
        constraints.append(z[np.flatnonzero(hi)] <= upper[hi])
    return constraints


def _row_constraints(z: cp.Variable, problem: MilpProblem) -> list:
    constraints = []
    for sense in ("E", "L", "G"):
        rows = np.flatnonzero(problem.senses == sense)
        if not rows.size:
            continue
        lhs = problem.A[rows] @ z
        rhs = problem.rhs[rows]
        constraints.append(lhs == rhs if sense == "E" else lhs <= rhs if sense == "L" else lhs >= rhs)
    return constraints


def _fixed_binaries(grid: MilpProblem, incumbent: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lower, upper = grid.lower.copy(), grid.upper.copy()
    mask = grid.binary_mask
    fixed = np.round(incumbent[:grid.num_variables][mask])
    lower[mask] = fixed
    upper[mask] = fixed
    return lower, upper


@dataclass(slots=True)
class _DsoStep:
    problem: cp.Problem
    z: cp.Variable
    target: cp.Parameter


@dataclass(slots=True)
class _BlaStep:
    problem: cp.Problem
    u: cp.Variable
    target: cp.Parameter


def _dso_step(grid: MilpProblem, A: sp.csr_matrix, lower: np.ndarray, upper: np.ndarray, rho: float) -> _DsoStep:
    z = cp.Variable(grid.num_variables)
    target = cp.Parameter(A.shape[0])
    objective = grid.cost @ z + (rho / 2.0) * cp.sum_squares(A @ z + target)
    constraints = _row_constraints(z, grid) + _finite_bounds(z, lower, upper)
    return _DsoStep(cp.Problem(cp.Minimize(objective), constraints), z, target)


def _bla_step(c: CompactBla, rho: float) -> _BlaStep:
    T = c.horizon
    x = cp.Variable(T)
    u = cp.Variable(T)
    target = cp.Parameter(T)
    constraints = [c.R @ x + c.S @ u == c.d, x >= c.x_lo, x <= c.x_hi]
    return _BlaStep(cp.Problem(cp.Minimize((rho / 2.0) * cp.sum_squares(u + target)), constraints), u, target)


def _solve_step(problem: cp.Problem, label: str) -> None:
    try:
        problem.solve(solver=cp.CLARABEL)
    except CvxpySolverError as exc:
        raise SolverError(f"{label} subproblem failed: {exc}") from exc
    if problem.status not in _ACCEPTED:
        raise SolverError(f"{label} subproblem ended with status {problem.status}")


class PpdcService(BaseService):
    """ADMM with decaying-amplitude noise, measured against a centralized reference cost."""

    def __init__(self, scenario: Scenario, logger: Optional[ErrorLogger] = None):
        super().__init__(logger)
        self.scenario = scenario

    def _final_cost(self, grid: GridBlock, lower: np.ndarray, upper: np.ndarray, u: dict[str, np.ndarray]) -> Optional[float]:
        """Grid LP with binaries and BLA powers pinned; None when the ADMM powers are not accommodated."""
        builder = ProblemBuilder.from_problem(grid.problem)
        builder.set_bounds(np.arange(grid.num_variables), lower=lower, upper=upper)
        for bla_id, slot in grid.bla_slots.items():
            builder.set_bounds(slot, lower=u[bla_id], upper=u[bla_id])
        result = solve(builder.build(), self.scenario.solver.backend, self.scenario.solver, self.logger)
        return float(result.objective) if result.is_optimal else None

    def run(
        self,
        cfg: Optional[PpdcConfig] = None,
        reference: Optional[DispatchRun] = None,
        reference_cost: Optional[float] = None,
    ) -> PpdcResult:
        """
        `reference` is the plaintext (NPPCC) run whose binaries are fixed; it
        is solved here when absent. The loss is measured against
        `reference_cost` when given, otherwise against that run's objective.
        """
        cfg = cfg or PpdcConfig()
        dispatch = DispatchService(self.scenario, self.logger)
        reference = reference or dispatch.run_plaintext()
        if not reference.result.is_optimal:
            raise UnavailableError(f"reference dispatch is {reference.result.status.value}, cannot fix binaries")
        reference_cost = float(reference.result.objective) if reference_cost is None else reference_cost

        grid = build_grid_block(self.scenario.network, self.scenario.horizon)
        ids = self.scenario.bla_ids
        A = coupling_matrix(self.scenario.network, grid, ids)
        T = grid.periods
        lower, upper = _fixed_binaries(grid.problem, reference.result.values)
        dso = _dso_step(grid.problem, A, lower, upper, cfg.rho)
        blas = {c.bla_id: _bla_step(c, cfg.rho) for c in dispatch.compacts()}

        rng = np.random.default_rng(cfg.seed)
        noise_scale = np.sqrt(cfg.noise_variance)
        reported = {bla_id: np.zeros(T) for bla_id in ids}
        u = {bla_id: np.zeros(T) for bla_id in ids}
        y = np.zeros(len(ids) * T)
        Az_prev = np.zeros(len(ids) * T)
        primal, dual = [], []
        converged = diverged = False
        iterations = 0

        for l in range(1, cfg.max_iterations + 1):
            iterations = l
            dso.target.value = np.concatenate([reported[k] for k in ids]) + y
            _solve_step(dso.problem, "DSO")
            Az = A @ dso.z.value

            amplitude = abs(cfg.phi) ** l
            for k, bla_id in enumerate(ids):
                step = blas[bla_id]
                step.target.value = Az[k * T:(k + 1) * T] + y[k * T:(k + 1) * T]
                _solve_step(step.problem, f"BLA {bla_id}")
                u[bla_id] = step.u.value.copy()
                reported[bla_id] = u[bla_id] + amplitude * rng.normal(0.0, noise_scale, size=T)

            r = Az + np.concatenate([reported[k] for k in ids])
            y = y + r
            primal.append(float(np.linalg.norm(r)))
            dual.append(float(cfg.rho * np.linalg.norm(Az - Az_prev)))
            Az_prev = Az

            if not (np.isfinite(primal[-1]) and np.isfinite(dual[-1])) or max(primal[-1], dual[-1]) > cfg.blow_up:
                diverged = True
                self.log_error("ADMM diverged", iteration=l, primal=primal[-1], dual=dual[-1], phi=cfg.phi)
                break
            if primal[-1] <= cfg.primal_tol and dual[-1] <= cfg.dual_tol:
                converged = True
                break

        cost = None if diverged else self._final_cost(grid, lower, upper, u)
        accommodated = cost is not None
        if not diverged and not accommodated:
            # the grid cannot take the final powers, so the run has no valid cost
            converged = False
            self.log_error("ADMM powers not accommodated by the grid", phi=cfg.phi, iterations=iterations)
        cost = float("nan") if cost is None else cost
        loss = optimality_loss(cost, reference_cost) if np.isfinite(cost) else float("nan")
        self.log_info(
            "ADMM finished", phi=cfg.phi, iterations=iterations, converged=converged, cost=cost, loss=loss,
        )
        return PpdcResult(
            converged=converged,
            iterations=iterations,
            cost=cost,
            loss_percent=loss,
            reference_cost=reference_cost,
            phi=cfg.phi,
            diverged=diverged,
            accommodated=accommodated,
            primal_residuals=primal,
            dual_residuals=dual,
        )


def run_ppdc(
    scenario: Scenario,
    cfg: Optional[PpdcConfig] = None,
    reference_cost: Optional[float] = None,
    logger: Optional[ErrorLogger] = None,
) -> PpdcResult:
    return PpdcService(scenario, logger).run(cfg, reference_cost=reference_cost)
