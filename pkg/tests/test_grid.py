import numpy as np
import pytest

from app.models.grid import NetworkModel
from app.services.grid import build_grid_block, coupling_matrix, orient_branches, validate_network
from app.utils.exceptions import InvalidModelError, InvalidPlacementError
from conftest import TOY_HORIZON, toy_raw


def network(**changes) -> NetworkModel:
    return NetworkModel.model_validate({**toy_raw()["network"], **changes})


def three_buses(branches) -> NetworkModel:
    raw = toy_raw()["network"]
    buses = raw["buses"] + [{"id": 3}]
    return NetworkModel.model_validate({**raw, "buses": buses, "branches": branches})


def branch(a, b):
    return {"from_bus": a, "to_bus": b, "r": 0.01, "x": 0.01, "p_max": 100.0}


def test_toy_network_passes(toy_scenario):
    report = validate_network(toy_scenario.network, horizon=TOY_HORIZON)
    assert report.passed, report.findings


def test_bundled_network_passes(bundled_scenario):
    report = validate_network(bundled_scenario.network, horizon=bundled_scenario.horizon)
    assert report.passed, report.findings


def test_cycle_is_reported():
    report = validate_network(three_buses([branch(1, 2), branch(2, 3), branch(3, 1)]))
    assert not report.passed
    assert any("cycle" in f for f in report.findings)


def test_disconnected_bus_is_reported():
    report = validate_network(three_buses([branch(1, 2)]))
    assert any("disconnected" in f for f in report.findings)


def test_bad_devices_are_itemized():
    n = network(
        batteries=[{
            "bus": 9, "p_chr_max": 10, "p_dis_max": 10, "eta_chr": 1.5,
            "e_max": 100, "e_init": 200,
        }],
        placements=[{"bus": 7, "bla_id": "BLA1"}],
    )
    findings = " | ".join(validate_network(n).findings)
    assert "unknown bus" in findings
    assert "efficiency" in findings
    assert "initial energy" in findings
    assert "BLA BLA1 placed on unknown bus 7" in findings


def test_series_length_is_checked_against_horizon():
    report = validate_network(network(), horizon=TOY_HORIZON + 1)
    assert any("tie_line.buy_price" in f for f in report.findings)


def test_invalid_network_refuses_to_build():
    with pytest.raises(InvalidModelError):
        build_grid_block(three_buses([branch(1, 2)]), TOY_HORIZON)


def test_toy_grid_block(toy_scenario):
    block = build_grid_block(toy_scenario.network, TOY_HORIZON)
    assert block.periods == TOY_HORIZON
    assert list(block.bla_slots) == ["BLA1"]
    assert block.bla_slots["BLA1"].shape == (TOY_HORIZON,)
    # buy and sell gates only: no batteries in the toy grid
    assert block.problem.num_binaries == 2 * TOY_HORIZON


def test_bundled_grid_block_binaries(bundled_scenario):
    block = build_grid_block(bundled_scenario.network, bundled_scenario.horizon)
    T = bundled_scenario.horizon
    assert block.problem.num_binaries == 2 * T + 2 * 2 * T
    assert set(block.bla_slots) == {"BLA1", "BLA2", "BLA3"}


def test_coupling_matrix_selects_slots(toy_scenario):
    block = build_grid_block(toy_scenario.network, TOY_HORIZON)
    A = coupling_matrix(toy_scenario.network, block, ["BLA1"])
    assert A.shape == (TOY_HORIZON, block.num_variables)
    dense = A.toarray()
    np.testing.assert_array_equal(np.flatnonzero(dense.sum(axis=0)), block.bla_slots["BLA1"])
    assert np.all(dense[dense != 0] == -1.0)


def test_coupling_matrix_rejects_unplaced_bla(toy_scenario):
    block = build_grid_block(toy_scenario.network, TOY_HORIZON)
    with pytest.raises(InvalidPlacementError):
        coupling_matrix(toy_scenario.network, block, ["BLA9"])


def test_branches_are_oriented_away_from_tie_bus(bundled_scenario):
    n = bundled_scenario.network
    oriented = orient_branches(n)
    assert len(oriented) == len(n.branches)
    assert oriented[0].parent == n.tie_line.bus
    children = [ob.child for ob in oriented]
    assert len(set(children)) == len(children)
    assert n.tie_line.bus not in children
    seen = {n.tie_line.bus}
    for ob in oriented:
        assert ob.parent in seen
        seen.add(ob.child)
