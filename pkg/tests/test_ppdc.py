import numpy as np
import pytest
from pydantic import ValidationError

from app.models.scenario import PpdcConfig
from app.services.dispatch import DispatchService
from app.services.ppdc import PpdcService, optimality_loss, run_ppdc
from app.utils.exceptions import UnavailableError, UndefinedReferenceError


@pytest.mark.parametrize(
    ("cost", "reference", "expected"),
    [(42227.0, 42097.0, 0.3088), (42348.0, 42097.0, 0.5962), (100.0, 100.0, 0.0), (90.0, 100.0, 10.0)],
)
def test_optimality_loss(cost, reference, expected):
    assert optimality_loss(cost, reference) == pytest.approx(expected, abs=1e-4)


def test_optimality_loss_needs_a_nonzero_reference():
    with pytest.raises(UndefinedReferenceError):
        optimality_loss(1.0, 0.0)


@pytest.mark.parametrize("phi", [1.0, -0.1])
def test_phi_must_lie_in_unit_interval(phi):
    with pytest.raises(ValidationError):
        PpdcConfig(phi=phi)


def test_noiseless_admm_stays_above_the_centralized_optimum(toy_scenario):
    reference = DispatchService(toy_scenario).run_plaintext()
    result = PpdcService(toy_scenario).run(PpdcConfig(phi=0.0, max_iterations=40), reference=reference)
    assert not result.diverged
    assert result.accommodated
    assert result.iterations == len(result.primal_residuals) == len(result.dual_residuals)
    assert result.reference_cost == pytest.approx(reference.solution.objective)
    assert np.isfinite(result.cost)
    # binaries are pinned and u stays inside each band
    assert result.cost >= result.reference_cost - 1e-4 * abs(result.reference_cost)
    assert result.loss_percent >= 0.0


def test_noisy_runs_are_reproducible(toy_scenario):
    cfg = PpdcConfig(phi=0.5, max_iterations=15, seed=3)
    first = run_ppdc(toy_scenario, cfg)
    second = run_ppdc(toy_scenario, cfg)
    assert first.iterations == second.iterations
    assert first.cost == pytest.approx(second.cost, rel=1e-9)
    np.testing.assert_allclose(first.primal_residuals, second.primal_residuals, rtol=1e-9)


def test_reference_cost_override(toy_scenario):
    result = run_ppdc(toy_scenario, PpdcConfig(max_iterations=5), reference_cost=1000.0)
    assert result.accommodated
    assert result.reference_cost == 1000.0
    assert result.loss_percent == pytest.approx(optimality_loss(result.cost, 1000.0))


def test_tiny_blow_up_threshold_stops_at_first_iteration(toy_scenario):
    result = run_ppdc(toy_scenario, PpdcConfig(blow_up=1e-9, max_iterations=10))
    assert result.diverged
    assert not result.converged
    assert result.iterations == 1


def test_infeasible_reference_cannot_fix_binaries(infeasible_scenario):
    with pytest.raises(UnavailableError):
        run_ppdc(infeasible_scenario, PpdcConfig(max_iterations=2))


def test_powers_the_grid_cannot_take_leave_no_cost(toy_scenario, monkeypatch):
    monkeypatch.setattr(PpdcService, "_final_cost", lambda self, *args: None)
    result = run_ppdc(toy_scenario, PpdcConfig(max_iterations=40))
    assert not result.accommodated
    assert not result.converged
    assert np.isnan(result.cost)
    assert np.isnan(result.loss_percent)
