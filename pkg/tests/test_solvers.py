import numpy as np
import pytest

from app.models.milp import ProblemBuilder, Sense, VarKind
from app.models.scenario import SolverOptions
from app.services.dispatch import DispatchService
from app.services.grid import build_grid_block
from app.solvers.base import SolveStatus, get_backend
from app.solvers.bruteforce import BruteForceBackend
from app.solvers.highs import HighsBackend
from app.solvers.lpfile import lp_name, render_lp, write_lp, write_triplets
from app.utils.exceptions import InvalidArgumentError, SolverError


def gated_problem():
    """min -x + 3b with x <= 10b: switching on pays off."""
    builder = ProblemBuilder()
    x = builder.add_variables("x", 1, lower=0.0, upper=100.0, cost=-1.0)
    b = builder.add_variables("b", 1, kind=VarKind.BINARY, cost=3.0)
    builder.add_rows("gate", [(np.eye(1), x), (-10.0 * np.eye(1), b)], Sense.LE, 0.0)
    return builder.build()


def arbitrage_problem():
    """Storage over two periods, cheap then expensive, charge and discharge gated by binaries."""
    builder = ProblemBuilder()
    price = np.array([1.0, 3.0])
    charge = builder.add_variables("charge", 2, lower=0.0, upper=5.0, cost=price)
    discharge = builder.add_variables("discharge", 2, lower=0.0, upper=5.0, cost=-price)
    on_c = builder.add_variables("on_c", 2, kind=VarKind.BINARY)
    on_d = builder.add_variables("on_d", 2, kind=VarKind.BINARY)
    energy = builder.add_variables("energy", 2, lower=0.0, upper=5.0)
    I = np.eye(2)
    shift = np.eye(2, k=-1)
    builder.add_rows("c_gate", [(I, charge), (-5.0 * I, on_c)], Sense.LE, 0.0)
    builder.add_rows("d_gate", [(I, discharge), (-5.0 * I, on_d)], Sense.LE, 0.0)
    builder.add_rows("exclusive", [(I, on_c), (I, on_d)], Sense.LE, 1.0)
    builder.add_rows("energy", [(I - shift, energy), (-I, charge), (I, discharge)], Sense.EQ, 0.0)
    return builder.build()


@pytest.mark.parametrize("backend", [HighsBackend(), BruteForceBackend()])
def test_small_milps(backend):
    result = backend.solve(gated_problem(), SolverOptions())
    assert result.status is SolveStatus.OPTIMAL
    assert result.objective == pytest.approx(-7.0)

    arbitrage = backend.solve(arbitrage_problem(), SolverOptions())
    assert arbitrage.objective == pytest.approx(-10.0)
    np.testing.assert_allclose(arbitrage.values[:4], [5.0, 0.0, 0.0, 5.0], atol=1e-7)


def test_backends_agree_on_toy_dispatch(toy_scenario):
    problem = DispatchService(toy_scenario).build("plaintext")
    assert problem.num_binaries <= 16
    highs = HighsBackend().solve(problem, toy_scenario.solver)
    oracle = BruteForceBackend().solve(problem, toy_scenario.solver)
    assert highs.objective == pytest.approx(oracle.objective, rel=1e-6)
    assert oracle.diagnostics["patterns"] == 2 ** problem.num_binaries


def test_infeasible_problem_is_reported():
    builder = ProblemBuilder()
    x = builder.add_variables("x", 1, lower=0.0, upper=1.0, cost=1.0)
    builder.add_rows("too_much", [(np.eye(1), x)], Sense.GE, 2.0)
    problem = builder.build()
    for backend in (HighsBackend(), BruteForceBackend()):
        assert backend.solve(problem, SolverOptions()).status is SolveStatus.INFEASIBLE


def test_brute_force_refuses_large_instances(bundled_scenario):
    grid = build_grid_block(bundled_scenario.network, bundled_scenario.horizon)
    with pytest.raises(SolverError, match="at most 16"):
        BruteForceBackend().solve(grid.problem, SolverOptions())


def test_backend_lookup():
    assert isinstance(get_backend("highs"), HighsBackend)
    assert isinstance(get_backend("bruteforce"), BruteForceBackend)
    with pytest.raises(InvalidArgumentError, match="unknown solver backend"):
        get_backend("gurobi")


def test_lp_rendering_is_deterministic_and_complete():
    problem = gated_problem()
    text = render_lp(problem, title="gated")
    assert text == render_lp(problem, title="gated")
    sections = ["Minimize", "Subject To", "Bounds", "Binaries", "End"]
    positions = [text.index(section) for section in sections]
    assert positions == sorted(positions)
    assert " obj: - 1.0 x(0) + 3.0 b(0)" in text
    assert " gate(0): + 1.0 x(0) - 10.0 b(0) <= 0.0" in text
    assert " 0.0 <= x(0) <= 100.0" in text


def test_lp_names_are_sanitized():
    assert lp_name("bla.BLA1.u[3]") == "bla.BLA1.u(3)"
    assert lp_name("branch.1-2.p[0]") == "branch.1_2.p(0)"


def test_exports_write_files(tmp_path):
    problem = gated_problem()
    lp = write_lp(problem, tmp_path / "gated.lp")
    assert lp.read_text() == render_lp(problem)
    triplets = write_triplets(problem, tmp_path / "gated.csv").read_text().splitlines()
    assert triplets[0] == "row,col,coeff"
    assert triplets[1:3] == ["0,0,1.0", "0,1,-10.0"]
    assert triplets[3:] == ["row,sense,rhs", "0,L,0.0"]
