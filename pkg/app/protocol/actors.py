from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.models.atdm import BlaParams
from app.models.masking import MaskingKeys, MaskingPolicy
from app.protocol.channel import SimulatedChannel
from app.protocol.messages import (
    ABORT,
    DISPATCH_COMMAND,
    DSO,
    MASKED_STATE_RESULT,
    UPLOAD_MASKED_MODEL,
    ProtocolMessage,
    upload_payload,
)
from app.services.atdm import build_compact, simulate
from app.services.masking import generate_keys, mask, recover_state, verify_recovered
from app.utils.exceptions import DispatchError
from app.utils.logs import ErrorLogger
from app.views.reports import FeasibilityReport


@dataclass(slots=True)
class BlaOutcome:
    bla_id: str
    status: str = "pending"
    x: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None
    feasibility: Optional[FeasibilityReport] = None
    reason: Optional[str] = None


class BlaActor:
    """
    One aggregator. Owns its private model, its key seed and its keys; only
    the masked blocks ever leave the actor.
    """

    def __init__(
        self,
        params: BlaParams,
        seed: int,
        channel: SimulatedChannel,
        policy: Optional[MaskingPolicy] = None,
        keys: Optional[MaskingKeys] = None,
        logger: Optional[ErrorLogger] = None,
    ):
        self.bla_id = params.id
        self._params = params
        self._seed = seed
        self._policy = policy or MaskingPolicy()
        self._keys = keys
        self._compact = None
        self.channel = channel
        self.inbox = channel.register(params.id)
        self.logger = logger
        self.outcome = BlaOutcome(bla_id=params.id)

    async def run(self) -> BlaOutcome:
        try:
            self._compact = build_compact(self._params)
            if self._keys is None:
                self._keys = generate_keys(self._compact.horizon, self._seed, self._policy)
            masked = mask(self._compact, self._keys)
        except DispatchError as exc:
            if self.logger:
                self.logger.log_key_error(self.bla_id, exc)
            self.outcome.status = "aborted"
            self.outcome.reason = exc.code
            await self.channel.send(self.bla_id, DSO, ABORT, {"reason": exc.code})
            return self.outcome

        await self.channel.send(self.bla_id, DSO, UPLOAD_MASKED_MODEL, upload_payload(masked))
        await self.handle_message(await self.inbox.get())
        return self.outcome

    async def handle_message(self, message: ProtocolMessage) -> None:
        handlers = {
            MASKED_STATE_RESULT: self._handle_result,
            DISPATCH_COMMAND: self._handle_command,
            ABORT: self._handle_abort,
        }
        handler = handlers.get(message.tag)
        if handler is None:
            self.outcome.status = "aborted"
            self.outcome.reason = f"unexpected {message.tag}"
            return
        await handler(message)

    async def _handle_result(self, message: ProtocolMessage) -> None:
        u = np.asarray(message.payload["u"], dtype=float)
        x = recover_state(message.payload["x_tilde"], self._keys.W)
        self.outcome.x = x
        self.outcome.u = u
        self.outcome.feasibility = verify_recovered(self._compact, x, u)
        self.outcome.status = "completed"

    async def _handle_command(self, message: ProtocolMessage) -> None:
        # control only: the BLA follows u and simulates its own state
        u = np.asarray(message.payload["u"], dtype=float)
        self.outcome.u = u
        self.outcome.x = simulate(self._params, u)
        self.outcome.feasibility = verify_recovered(self._compact, self.outcome.x, u)
        self.outcome.status = "completed"

    async def _handle_abort(self, message: ProtocolMessage) -> None:
        self.outcome.status = "aborted"
        self.outcome.reason = str(message.payload.get("reason"))
