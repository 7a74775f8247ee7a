"""Reference MILP backend on the HiGHS solver."""
import time

import highspy
import numpy as np

from app.models.milp import MilpProblem
from app.models.scenario import SolverOptions
from app.solvers.base import SolverBackend, SolverResult, SolveStatus
from app.utils.exceptions import SolverError

_STATUS = {
    highspy.HighsModelStatus.kOptimal: SolveStatus.OPTIMAL,
    highspy.HighsModelStatus.kInfeasible: SolveStatus.INFEASIBLE,
    highspy.HighsModelStatus.kUnboundedOrInfeasible: SolveStatus.INFEASIBLE,
    highspy.HighsModelStatus.kUnbounded: SolveStatus.UNBOUNDED,
    highspy.HighsModelStatus.kTimeLimit: SolveStatus.LIMIT,
    highspy.HighsModelStatus.kIterationLimit: SolveStatus.LIMIT,
    highspy.HighsModelStatus.kSolutionLimit: SolveStatus.LIMIT,
    highspy.HighsModelStatus.kInterrupt: SolveStatus.LIMIT,
}


def _finite(values: np.ndarray) -> np.ndarray:
    return np.clip(values, -highspy.kHighsInf, highspy.kHighsInf)


class HighsBackend(SolverBackend):
    name = "highs"

    def _load(self, problem: MilpProblem) -> highspy.HighsLp:
        lp = highspy.HighsLp()
        lp.num_col_ = problem.num_variables
        lp.num_row_ = problem.num_rows
        lp.offset_ = problem.offset
        lp.col_cost_ = problem.cost
        lp.col_lower_ = _finite(problem.lower)
        lp.col_upper_ = _finite(problem.upper)
        row_lo, row_hi = self.row_bounds(problem)
        lp.row_lower_ = _finite(row_lo)
        lp.row_upper_ = _finite(row_hi)

        csc = problem.A.tocsc()
        csc.sort_indices()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.num_col_ = problem.num_variables
        lp.a_matrix_.num_row_ = problem.num_rows
        lp.a_matrix_.start_ = csc.indptr
        lp.a_matrix_.index_ = csc.indices
        lp.a_matrix_.value_ = csc.data
        if problem.num_binaries:
            lp.integrality_ = [
                highspy.HighsVarType.kInteger if is_binary else highspy.HighsVarType.kContinuous
                for is_binary in problem.binary_mask
            ]
        return lp

    def solve(self, problem: MilpProblem, options: SolverOptions) -> SolverResult:
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("mip_rel_gap", options.gap)
        h.setOptionValue("time_limit", float(options.time_limit))
        h.setOptionValue("random_seed", int(options.seed))
        h.setOptionValue("threads", int(options.threads))
        h.setOptionValue("primal_feasibility_tolerance", options.feasibility_tol)
        h.setOptionValue("mip_feasibility_tolerance", options.feasibility_tol)

        started = time.perf_counter()
        try:
            h.passModel(self._load(problem))
            h.run()
        except Exception as exc:
            if self.logger:
                self.logger.log_solver_error(self.name, exc, variables=problem.num_variables, rows=problem.num_rows)
            raise SolverError(f"HiGHS failed: {exc}") from exc
        elapsed = time.perf_counter() - started

        model_status = h.getModelStatus()
        status = _STATUS.get(model_status)
        if status is None:
            message = h.modelStatusToString(model_status)
            if self.logger:
                self.logger.error("HiGHS returned an unusable status", status=message)
            raise SolverError(f"HiGHS returned status {message!r}")

        info = h.getInfo()
        solution = h.getSolution()
        has_values = status in (SolveStatus.OPTIMAL, SolveStatus.LIMIT) and solution.value_valid
        values = np.asarray(solution.col_value, dtype=float) if has_values else np.full(problem.num_variables, np.nan)
        objective = float(info.objective_function_value) if has_values else float("nan")
        gap = float(info.mip_gap) if problem.num_binaries else 0.0
        if not np.isfinite(gap):
            gap = 0.0 if status is SolveStatus.OPTIMAL else float("inf")
        return SolverResult(
            status=status,
            objective=objective,
            values=values,
            gap=gap,
            wall_time=elapsed,
            backend=self.name,
            diagnostics={"model_status": h.modelStatusToString(model_status)},
        )
