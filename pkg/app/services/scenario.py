"""
Scenario files: JSON parsed with orjson, validated by the pydantic models,
then checked against the network rules. Every failure is collected into a
ScenarioError whose findings carry the field path or the source line.
"""
import hashlib
from pathlib import Path
from typing import Any, Optional, Union

import orjson
from pydantic import ValidationError

from app.models.atdm import ZoneAggregation
from app.models.scenario import ExperimentSpec, Scenario
from app.services.atdm import aggregate_zones
from app.services.grid import validate_network
from app.utils.exceptions import ScenarioError


def _location(loc: tuple) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def _findings(exc: ValidationError) -> list[str]:
    return [f"{_location(err['loc'])}: {err['msg']}" for err in exc.errors()]


def _derive_history(raw: Any) -> Any:
    """Fill a missing hist_x from the trailing aggregate temperatures of the zone block."""
    if not isinstance(raw, dict) or not isinstance(raw.get("blas"), list):
        return raw
    blas = []
    for entry in raw["blas"]:
        if isinstance(entry, dict) and entry.get("zones") and not entry.get("hist_x"):
            try:
                zones = ZoneAggregation.model_validate(entry["zones"])
                order = int(entry.get("order", 0))
            except (ValidationError, TypeError, ValueError):
                # left as is: the model validation reports the zone block
                blas.append(entry)
                continue
            temps = aggregate_zones(zones)
            if order >= 1 and temps.shape[0] >= order:
                entry = {**entry, "hist_x": temps[-order:].tolist()}
        blas.append(entry)
    return {**raw, "blas": blas}


def parse_scenario(raw: Union[bytes, str, dict], source: str = "<scenario>") -> Scenario:
    if not isinstance(raw, dict):
        try:
            raw = orjson.loads(raw)
        except orjson.JSONDecodeError as exc:
            raise ScenarioError(
                f"{source} is not valid JSON",
                [f"line {exc.lineno} column {exc.colno}: {exc.msg}"],
            ) from exc
    try:
        scenario = Scenario.model_validate(_derive_history(raw))
    except ValidationError as exc:
        raise ScenarioError(f"{source} failed validation", _findings(exc)) from exc

    report = validate_network(scenario.network, horizon=scenario.horizon)
    if not report.passed:
        raise ScenarioError(f"{source} has an invalid network", [f"network: {item}" for item in report.findings])
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}", [str(exc)]) from exc
    return parse_scenario(raw, source=str(path))


def load_experiment(path: Union[str, Path], kind: Optional[str] = None) -> ExperimentSpec:
    """Experiment knobs from a JSON file; `kind` overrides the file's kind."""
    try:
        raw = orjson.loads(Path(path).read_bytes())
    except (OSError, orjson.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read experiment spec {path}", [str(exc)]) from exc
    if kind is not None:
        raw = {**raw, "kind": kind}
    try:
        return ExperimentSpec.model_validate(raw)
    except ValidationError as exc:
        raise ScenarioError(f"{path} failed validation", _findings(exc)) from exc


def check_experiment(s: Scenario, e: ExperimentSpec) -> None:
    """Cross-checks between an experiment's grids and the scenario it runs on."""
    problems = []
    count = len(s.bla_ids)
    if e.kind == "case_sweep":
        for i, mask in enumerate(e.participation_cases(count)):
            if len(mask) != count:
                problems.append(f"participation.{i}: {len(mask)} entries for {count} BLAs")
    for name in e.tau_center:
        if name not in s.bla_ids:
            problems.append(f"tau_center: unknown BLA {name}")
    for name in e.band_targets or []:
        if name not in s.bla_ids:
            problems.append(f"band_targets: unknown BLA {name}")
    if problems:
        raise ScenarioError("experiment does not fit the scenario", problems)


def scenario_digest(s: Scenario) -> str:
    """sha256 over the canonical JSON form; identical inputs replay to identical digests."""
    canonical = orjson.dumps(s.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)
    return hashlib.sha256(canonical).hexdigest()


def with_solver_overrides(s: Scenario, gap: Optional[float] = None, time_limit: Optional[float] = None) -> Scenario:
    update = {}
    if gap is not None:
        update["gap"] = gap
    if time_limit is not None:
        update["time_limit"] = time_limit
    if not update:
        return s
    return s.model_copy(update={"solver": s.solver.model_copy(update=update)})
