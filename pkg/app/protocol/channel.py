import asyncio
from typing import Any, Callable, Optional

from app.protocol.messages import TAGS, ProtocolMessage
from app.protocol.transcript import ProtocolTranscript
from app.utils.exceptions import InvalidArgumentError
from app.utils.logs import ErrorLogger

Tap = Callable[[ProtocolMessage], None]


class SimulatedChannel:
    """
    In-process transport between protocol actors.

    Each registered actor owns one mailbox. Sends go through a single lock
    that stamps the logical clock and appends to the transcript, so the
    recorded order is a total order. Taps receive a copy of every message.
    """

    def __init__(self, logger: Optional[ErrorLogger] = None):
        self.mailboxes: dict[str, asyncio.Queue[ProtocolMessage]] = {}
        self.transcript = ProtocolTranscript()
        self._taps: list[Tap] = []
        self._clock = 0
        self._lock = asyncio.Lock()
        self._logger = logger

    @property
    def clock(self) -> int:
        return self._clock

    def register(self, actor: str) -> asyncio.Queue[ProtocolMessage]:
        if actor in self.mailboxes:
            raise InvalidArgumentError(f"actor {actor!r} registered twice")
        self.mailboxes[actor] = asyncio.Queue()
        return self.mailboxes[actor]

    def add_tap(self, tap: Tap) -> None:
        """Attach a passive eavesdropper."""
        self._taps.append(tap)

    async def send(self, sender: str, receiver: str, tag: str, payload: dict[str, Any]) -> ProtocolMessage:
        if tag not in TAGS:
            raise InvalidArgumentError(f"unknown message tag {tag!r}")
        mailbox = self.mailboxes.get(receiver)
        if mailbox is None:
            raise InvalidArgumentError(f"no actor named {receiver!r}")
        async with self._lock:
            self._clock += 1
            message = ProtocolMessage(sender=sender, receiver=receiver, tag=tag, payload=payload, timestamp=self._clock)
            self.transcript.record(message)
            for tap in self._taps:
                tap(message)
            await mailbox.put(message)
        if self._logger:
            self._logger.debug("message sent", sender=sender, receiver=receiver, tag=tag, timestamp=message.timestamp)
        return message

    async def send_to_many(
        self, sender: str, receivers: list[str], tag: str, payload_for: Callable[[str], dict[str, Any]]
    ) -> list[ProtocolMessage]:
        return [await self.send(sender, receiver, tag, payload_for(receiver)) for receiver in receivers]
