import asyncio
from typing import Optional

import numpy as np

from app.models.masking import MaskedBla
from app.models.milp import MilpProblem
from app.models.grid import NetworkModel
from app.models.scenario import SolverOptions
from app.protocol.channel import SimulatedChannel
from app.protocol.messages import (
    ABORT,
    DISPATCH_COMMAND,
    DSO,
    MASKED_STATE_RESULT,
    UPLOAD_FIELDS,
    UPLOAD_MASKED_MODEL,
    ProtocolMessage,
    masked_from_payload,
)
from app.services.dispatch import extract_dispatch, solve_uploads
from app.solvers.base import SolverResult
from app.utils.exceptions import DispatchError, ProtocolAbortedError
from app.utils.logs import ErrorLogger
from app.views.reports import DispatchSolution


class DsoHandler:
    """DSO side of the exchange: collect uploads, solve P1, distribute masked results."""

    MSG_UPLOAD = UPLOAD_MASKED_MODEL
    MSG_ABORT = ABORT
    MSG_RESULT = MASKED_STATE_RESULT
    MSG_COMMAND = DISPATCH_COMMAND

    def __init__(
        self,
        channel: SimulatedChannel,
        network: NetworkModel,
        horizon: int,
        bla_ids: tuple[str, ...],
        solver: SolverOptions,
        logger: Optional[ErrorLogger] = None,
        command_only: bool = False,
    ):
        self.channel = channel
        self.command_only = command_only
        self.network = network
        self.horizon = horizon
        self.bla_ids = bla_ids
        self.solver = solver
        self.logger = logger
        self.inbox = channel.register(DSO)
        self.uploads: dict[str, MaskedBla] = {}
        self.abort_reason: Optional[str] = None
        self.problem: Optional[MilpProblem] = None
        self.result: Optional[SolverResult] = None
        self.solution: Optional[DispatchSolution] = None

    @property
    def pending(self) -> list[str]:
        return [bla_id for bla_id in self.bla_ids if bla_id not in self.uploads]

    async def handle_message(self, message: ProtocolMessage) -> None:
        """Route one incoming message by tag."""
        handlers = {
            self.MSG_UPLOAD: self._handle_upload,
            self.MSG_ABORT: self._handle_abort,
        }
        handler = handlers.get(message.tag)
        if handler is None:
            self._fail(f"unexpected {message.tag} from {message.sender}")
            return
        try:
            await handler(message)
        except DispatchError as exc:
            self._fail(f"{exc.code}: {exc.message}")

    async def _handle_upload(self, message: ProtocolMessage) -> None:
        payload = message.payload
        extra = set(payload) - UPLOAD_FIELDS
        if extra:
            self._fail(f"upload from {message.sender} carries forbidden fields {sorted(extra)}")
            return
        if payload.get("bla_id") != message.sender or message.sender not in self.bla_ids:
            self._fail(f"upload from {message.sender} does not match a placed BLA")
            return
        masked = masked_from_payload(payload)
        if masked.horizon != self.horizon:
            self._fail(f"upload from {message.sender} has horizon {masked.horizon}, expected {self.horizon}")
            return
        self.uploads[message.sender] = masked

    async def _handle_abort(self, message: ProtocolMessage) -> None:
        self._fail(f"{message.sender} aborted: {message.payload.get('reason', 'unknown')}")

    def _fail(self, reason: str) -> None:
        if self.abort_reason is None:
            self.abort_reason = reason
            if self.logger:
                self.logger.log_protocol_error(DSO, ProtocolAbortedError(reason))

    def _solve(self) -> None:
        self.problem, self.result = solve_uploads(
            self.network, self.horizon, self.bla_ids, self.uploads, self.solver, self.logger
        )

    async def run(self) -> None:
        while self.pending and self.abort_reason is None:
            await self.handle_message(await self.inbox.get())

        if self.abort_reason is None:
            try:
                await asyncio.to_thread(self._solve)
            except DispatchError as exc:
                self._fail(f"{exc.code}: {exc.message}")
        if self.abort_reason is None and not self.result.is_optimal:
            self._fail(f"solver status {self.result.status.value}")

        if self.abort_reason is not None:
            status = self.result.status.value if self.result is not None else "aborted"
            await self.channel.send_to_many(
                DSO, list(self.bla_ids), self.MSG_ABORT,
                lambda _: {"reason": self.abort_reason, "status": status},
            )
            return

        self.solution = extract_dispatch(self.result, self.problem)
        if self.command_only:
            await self.channel.send_to_many(
                DSO, list(self.bla_ids), self.MSG_COMMAND,
                lambda bla_id: {"u": np.asarray(self.solution.bla_control[bla_id])},
            )
            return
        await self.channel.send_to_many(
            DSO, list(self.bla_ids), self.MSG_RESULT,
            lambda bla_id: {
                "x_tilde": np.asarray(self.solution.bla_state[bla_id]),
                "u": np.asarray(self.solution.bla_control[bla_id]),
                "status": self.result.status.value,
            },
        )
