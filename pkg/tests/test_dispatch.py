import dataclasses

import numpy as np
import pytest

from app.models.atdm import BlaParams
from app.models.milp import ProblemBuilder, Sense
from app.services.atdm import build_compact, simulate
from app.services.dispatch import (
    DispatchService,
    assemble,
    condense_rows,
    constraint_violation,
    equilibrate_rows,
    extract_dispatch,
    resolve_key_seeds,
    solve,
    solve_uploads,
)
from app.services.grid import build_grid_block, coupling_matrix
from app.services.masking import bound_vector, generate_keys, mask
from app.solvers.base import SolverResult, SolveStatus
from app.utils.exceptions import InvalidArgumentError, UnavailableError
from conftest import TOY_HORIZON, bla_one


def relative(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def test_plaintext_dispatch_keeps_the_band(toy_scenario):
    run = DispatchService(toy_scenario).run_plaintext()
    assert run.result.is_optimal
    x = run.solution.bla_state["BLA1"]
    assert x.shape == (TOY_HORIZON,)
    assert np.all(x <= 27.0 + 1e-6) and np.all(x >= 23.0 - 1e-6)
    assert constraint_violation(run.problem, run.result.values) <= 1e-6
    assert run.solution.objective == pytest.approx(run.solution.c_grid + run.solution.c_om, rel=1e-9)


@pytest.mark.parametrize("masking_seed", [1, 2, 3])
def test_masked_dispatch_matches_plaintext(toy_scenario, masking_seed):
    service = DispatchService(toy_scenario)
    plain = service.run_plaintext()
    masked = service.run_masked(masking_seed=masking_seed)
    assert masked.result.is_optimal
    assert relative(masked.solution.objective, plain.solution.objective) <= 1e-5
    assert all(report.passed for report in masked.feasibility.values())


def test_masked_run_records_modeling_and_solving_time(toy_scenario):
    run = DispatchService(toy_scenario).run_masked(masking_seed=5)
    assert run.modeling_seconds > 0
    assert run.solving_seconds > 0
    assert set(run.keys) == {"BLA1"}


def test_build_assembles_without_solving(toy_scenario):
    service = DispatchService(toy_scenario)
    plain = service.build("plaintext")
    masked = service.build("masked", masking_seed=1)
    assert "bla.BLA1.x" in plain.layout.groups
    assert "bla.BLA1.x_tilde" in masked.layout.groups
    assert masked.num_variables == plain.num_variables + 2 * TOY_HORIZON


def test_assemble_rejects_mismatched_payloads(toy_scenario):
    block = build_grid_block(toy_scenario.network, TOY_HORIZON)
    A = coupling_matrix(toy_scenario.network, block, ["BLA1"])
    compact = DispatchService(toy_scenario).compacts()[0]
    with pytest.raises(InvalidArgumentError):
        assemble(block, A, [compact], "masked")
    with pytest.raises(InvalidArgumentError):
        assemble(block, A, [compact], "mixed")
    with pytest.raises(InvalidArgumentError):
        assemble(block, A[:, :-1], [compact], "plaintext")


def test_extract_dispatch_needs_an_optimal_result(toy_scenario):
    problem = DispatchService(toy_scenario).build("plaintext")
    failed = SolverResult(
        status=SolveStatus.INFEASIBLE, objective=float("nan"),
        values=np.full(problem.num_variables, np.nan), gap=0.0, wall_time=0.0, backend="test",
    )
    with pytest.raises(UnavailableError):
        extract_dispatch(failed, problem)


def test_solve_uploads_waits_for_every_bla(toy_scenario):
    with pytest.raises(UnavailableError, match="BLA1"):
        solve_uploads(toy_scenario.network, TOY_HORIZON, toy_scenario.bla_ids, {}, toy_scenario.solver)


def test_solve_uploads_matches_masked_run(toy_scenario):
    service = DispatchService(toy_scenario)
    compact = service.compacts()[0]
    seeds = service.key_seeds(4)
    keys = generate_keys(TOY_HORIZON, seeds["BLA1"], toy_scenario.masking)
    _, result = solve_uploads(
        toy_scenario.network, TOY_HORIZON, toy_scenario.bla_ids, {"BLA1": mask(compact, keys)}, toy_scenario.solver,
    )
    assert result.objective == pytest.approx(service.run_masked(masking_seed=4).result.objective, rel=1e-9)


def test_infeasible_grid_reports_status(infeasible_scenario):
    run = DispatchService(infeasible_scenario).run_plaintext()
    assert run.result.status is SolveStatus.INFEASIBLE
    assert run.solution is None


def test_key_seed_resolution(toy_scenario):
    pinned = toy_scenario.model_copy(update={"seeds": {"BLA1": 99}})
    assert resolve_key_seeds(pinned) == {"BLA1": 99}
    assert resolve_key_seeds(pinned, masking_seed=3) != {"BLA1": 99}
    assert resolve_key_seeds(toy_scenario, 3) == resolve_key_seeds(toy_scenario, 3)


def test_row_equilibration_scales_to_unit_norm():
    a = np.array([[2.0, -4.0], [0.0, 0.0], [0.5, 0.25]])
    b = np.array([[1.0], [0.0], [-0.1]])
    scale = equilibrate_rows(a, b)
    np.testing.assert_allclose(scale, [0.25, 1.0, 2.0])


def test_constraint_violation_measures_rows_and_bounds():
    builder = ProblemBuilder()
    x = builder.add_variables("x", 2, lower=0.0, upper=1.0)
    builder.add_rows("sum", [(np.ones((1, 2)), x)], Sense.LE, 1.0)
    problem = builder.build()
    assert constraint_violation(problem, np.array([0.5, 0.5])) == 0.0
    assert constraint_violation(problem, np.array([1.0, 1.0])) == pytest.approx(1.0)
    assert constraint_violation(problem, np.array([-0.5, 0.0])) == pytest.approx(0.5)


def test_condensed_rows_keep_the_masked_solution_set():
    T = 6
    params = BlaParams.model_validate(bla_one(T))
    compact = build_compact(params)
    keys = generate_keys(T, seed=11)
    masked = mask(compact, keys)
    M, rhs = condense_rows(masked)
    assert M.shape == (3 * T, 4 * T)
    pivot = np.r_[0:T, 2 * T:4 * T]
    np.testing.assert_array_equal(M[:, pivot], np.eye(3 * T))

    u = np.full(T, 120.0)
    x_tilde = np.linalg.solve(keys.W, simulate(params, u))
    D = np.vstack([keys.W, -keys.W])
    w = np.linalg.solve(keys.E, bound_vector(compact) - D @ x_tilde)
    z = np.concatenate([x_tilde, u, w])
    np.testing.assert_allclose(masked.f1 @ x_tilde + masked.f2 @ u + masked.f3 @ w, masked.f4, rtol=1e-9, atol=1e-7)
    assert np.max(np.abs(M @ z - rhs)) <= 1e-7 * (1.0 + np.max(np.abs(rhs)))


def test_condensed_assembly_drops_duplicate_rows(toy_scenario):
    service = DispatchService(toy_scenario)
    compact = service.compacts()[0]
    masked = mask(compact, generate_keys(TOY_HORIZON, seed=3, policy=toy_scenario.masking))
    block = build_grid_block(toy_scenario.network, TOY_HORIZON)
    A = coupling_matrix(toy_scenario.network, block, ["BLA1"])
    full = assemble(block, A, [masked], "masked", condense=False)
    condensed = assemble(block, A, [masked], "masked")
    assert full.num_rows - condensed.num_rows == 3 * (masked.duplication - 1) * TOY_HORIZON
    plain = service.run_plaintext()
    assert relative(solve(condensed, "highs").objective, plain.solution.objective) <= 1e-5


@pytest.mark.slow
@pytest.mark.parametrize("masking_seed", range(1, 11))
def test_bundled_masked_objective_matches_plaintext(bundled_scenario, masking_seed):
    service = DispatchService(bundled_scenario)
    plain = service.run_plaintext()
    masked = service.run_masked(masking_seed=masking_seed)
    assert masked.result.is_optimal
    tolerance = max(1e-5, 2 * bundled_scenario.solver.gap)
    assert relative(masked.solution.objective, plain.solution.objective) <= tolerance
    assert all(report.passed for report in masked.feasibility.values())


def test_condense_rejects_blocks_without_distinct_rows(toy_scenario):
    compact = DispatchService(toy_scenario).compacts()[0]
    masked = mask(compact, generate_keys(TOY_HORIZON, seed=3, policy=toy_scenario.masking))
    truncated = dataclasses.replace(masked, f1=masked.f1[:-1], f2=masked.f2[:-1], f3=masked.f3[:-1], f4=masked.f4[:-1])
    with pytest.raises(InvalidArgumentError, match="distinct rows"):
        condense_rows(truncated)
