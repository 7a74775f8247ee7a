"""
Oracle backend: enumerate every binary pattern and solve the remaining LP
with dual simplex. Only meant for small instances.
"""
import itertools
import time

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from app.models.milp import MilpProblem
from app.models.scenario import SolverOptions
from app.solvers.base import SolverBackend, SolverResult, SolveStatus
from app.utils.exceptions import SolverError

MAX_BINARIES = 16


class BruteForceBackend(SolverBackend):
    name = "bruteforce"

    def solve(self, problem: MilpProblem, options: SolverOptions) -> SolverResult:
        if problem.num_binaries > MAX_BINARIES:
            raise SolverError(
                f"brute-force backend handles at most {MAX_BINARIES} binaries, got {problem.num_binaries}"
            )
        A = problem.A.tocsr()
        le = problem.senses == "L"
        ge = problem.senses == "G"
        eq = problem.senses == "E"
        A_ub = sp.vstack([A[le], -A[ge]]).tocsr()
        b_ub = np.concatenate([problem.rhs[le], -problem.rhs[ge]])
        A_eq = A[eq]
        b_eq = problem.rhs[eq]
        binary_cols = np.flatnonzero(problem.binary_mask)

        started = time.perf_counter()
        best_value = np.inf
        best_x = None
        unbounded = False
        for pattern in itertools.product((0.0, 1.0), repeat=len(binary_cols)):
            lower = problem.lower.copy()
            upper = problem.upper.copy()
            lower[binary_cols] = pattern
            upper[binary_cols] = pattern
            result = linprog(
                problem.cost,
                A_ub=A_ub if A_ub.shape[0] else None,
                b_ub=b_ub if A_ub.shape[0] else None,
                A_eq=A_eq if A_eq.shape[0] else None,
                b_eq=b_eq if A_eq.shape[0] else None,
                bounds=np.column_stack([lower, upper]),
                method="highs-ds",
            )
            if result.status == 3:
                unbounded = True
                break
            if result.status == 0 and result.fun < best_value:
                best_value = float(result.fun)
                best_x = np.asarray(result.x, dtype=float)
            elif result.status not in (0, 2):
                raise SolverError(f"linprog failed on a binary pattern: {result.message}")
        elapsed = time.perf_counter() - started

        if unbounded:
            status = SolveStatus.UNBOUNDED
        elif best_x is None:
            status = SolveStatus.INFEASIBLE
        else:
            status = SolveStatus.OPTIMAL
        values = best_x if best_x is not None else np.full(problem.num_variables, np.nan)
        objective = best_value + problem.offset if best_x is not None else float("nan")
        return SolverResult(
            status=status,
            objective=objective,
            values=values,
            gap=0.0,
            wall_time=elapsed,
            backend=self.name,
            diagnostics={"patterns": 2 ** len(binary_cols)},
        )
