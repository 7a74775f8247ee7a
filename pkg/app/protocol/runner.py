import asyncio
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from app.models.masking import MaskingKeys
from app.models.milp import MilpProblem
from app.models.scenario import Scenario
from app.protocol.actors import BlaActor, BlaOutcome
from app.protocol.channel import SimulatedChannel, Tap
from app.protocol.handler import DsoHandler
from app.protocol.messages import DSO
from app.protocol.transcript import ProtocolTranscript
from app.services.dispatch import resolve_key_seeds
from app.solvers.base import SolverResult
from app.utils.exceptions import ProtocolAbortedError
from app.utils.logs import ErrorLogger
from app.views.reports import DispatchSolution, FeasibilityReport


@dataclass(slots=True)
class ProtocolOutcome:
    status: str
    transcript: ProtocolTranscript
    solution: Optional[DispatchSolution] = None
    result: Optional[SolverResult] = None
    problem: Optional[MilpProblem] = None
    bla_outcomes: dict[str, BlaOutcome] = field(default_factory=dict)
    reason: Optional[str] = None

    @property
    def recovered(self) -> dict[str, np.ndarray]:
        return {k: o.x for k, o in self.bla_outcomes.items() if o.x is not None}

    @property
    def feasibility(self) -> dict[str, FeasibilityReport]:
        return {k: o.feasibility for k, o in self.bla_outcomes.items() if o.feasibility is not None}

    def raise_for_status(self) -> "ProtocolOutcome":
        if self.status != "completed":
            raise ProtocolAbortedError(f"protocol aborted: {self.reason}")
        return self


async def run_protocol_async(
    scenario: Scenario,
    seeds: Optional[dict[str, int]] = None,
    keys: Optional[dict[str, MaskingKeys]] = None,
    taps: tuple[Tap, ...] = (),
    command_only: bool = False,
    logger: Optional[ErrorLogger] = None,
) -> ProtocolOutcome:
    """
    One round of the privacy-preserved dispatch: every BLA masks and uploads,
    the DSO solves the masked problem and hands each BLA its masked result,
    each BLA recovers its state.

    `keys` forces specific key sets (negative controls); otherwise each BLA
    draws its own from its seed.
    """
    seeds = dict(seeds) if seeds is not None else resolve_key_seeds(scenario)
    channel = SimulatedChannel(logger)
    for tap in taps:
        channel.add_tap(tap)
    dso = DsoHandler(
        channel, scenario.network, scenario.horizon, scenario.bla_ids, scenario.solver,
        logger=logger, command_only=command_only,
    )
    actors = [
        BlaActor(
            scenario.bla(bla_id), seeds[bla_id], channel, scenario.masking,
            keys=(keys or {}).get(bla_id), logger=logger,
        )
        for bla_id in scenario.bla_ids
    ]

    outcomes = await asyncio.gather(dso.run(), *(actor.run() for actor in actors))
    bla_outcomes = {o.bla_id: o for o in outcomes[1:]}

    transcript = channel.transcript
    transcript.seeds = {**seeds, DSO: scenario.solver.seed}
    transcript.outcomes = {bla_id: o.status for bla_id, o in bla_outcomes.items()}
    completed = dso.abort_reason is None and all(o.status == "completed" for o in bla_outcomes.values())
    transcript.outcomes[DSO] = "completed" if completed else "aborted"
    if logger:
        logger.info("protocol finished", status=transcript.outcomes[DSO], messages=len(transcript.records))
    return ProtocolOutcome(
        status="completed" if completed else "aborted",
        transcript=transcript,
        solution=dso.solution,
        result=dso.result,
        problem=dso.problem,
        bla_outcomes=bla_outcomes,
        reason=dso.abort_reason,
    )


def run_protocol(scenario: Scenario, seeds: Optional[dict[str, int]] = None, **kwargs) -> ProtocolOutcome:
    return asyncio.run(run_protocol_async(scenario, seeds, **kwargs))
