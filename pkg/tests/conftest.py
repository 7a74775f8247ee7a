from pathlib import Path
from typing import Any

import orjson
import pytest

from app.models.atdm import BlaParams
from app.models.scenario import Scenario
from app.services.scenario import load_scenario, parse_scenario
from app.utils.config import BUNDLED_SCENARIO_PATH

TOY_HORIZON = 4


def bla_one(horizon: int) -> dict[str, Any]:
    """First bundled BLA: alpha 0.96, beta (0.005, 0.003), gamma 0.02, band [23, 27]."""
    return {
        "id": "BLA1",
        "horizon": horizon,
        "order": 1,
        "alpha": [0.96],
        "beta": [0.005, 0.003],
        "gamma": 0.02,
        "temp_hi": 27.0,
        "temp_lo": 23.0,
        "hist_x": [23.0],
        "hist_u": [100.0],
    }


def toy_raw(horizon: int = TOY_HORIZON, tie_limit: float = 2000.0) -> dict[str, Any]:
    """Two buses, one branch, one BLA on bus 2, time-of-use prices."""
    buy = [0.3, 0.6, 1.0, 0.6]
    sell = [0.2, 0.4, 0.7, 0.4]
    return {
        "schema_version": 1,
        "name": "toy",
        "horizon": horizon,
        "dt": 1.0,
        "network": {
            "buses": [
                {"id": 1, "v_min": 0.9, "v_max": 1.1},
                {"id": 2, "v_min": 0.9, "v_max": 1.1, "p_load": [50.0], "q_load": [10.0]},
            ],
            "branches": [{"from_bus": 1, "to_bus": 2, "r": 0.01, "x": 0.01, "p_max": 2000.0}],
            "tie_line": {
                "bus": 1,
                "p_max": [tie_limit],
                "buy_price": (buy * horizon)[:horizon],
                "sell_price": (sell * horizon)[:horizon],
            },
            "placements": [{"bus": 2, "bla_id": "BLA1"}],
        },
        "blas": [bla_one(horizon)],
        "seed": 7,
    }


@pytest.fixture
def toy_scenario() -> Scenario:
    return parse_scenario(toy_raw(), source="toy")


@pytest.fixture
def infeasible_scenario() -> Scenario:
    # the tie line cannot carry the load
    return parse_scenario(toy_raw(tie_limit=0.0), source="toy-infeasible")


@pytest.fixture
def toy_params() -> BlaParams:
    return BlaParams.model_validate(bla_one(TOY_HORIZON))


@pytest.fixture(scope="session")
def bundled_scenario() -> Scenario:
    return load_scenario(BUNDLED_SCENARIO_PATH)


@pytest.fixture
def scenario_file(tmp_path: Path):
    """Write a raw scenario dict to a JSON file and return its path."""

    def write(raw: dict[str, Any], name: str = "scenario.json") -> Path:
        path = tmp_path / name
        path.write_bytes(orjson.dumps(raw))
        return path

    return write
