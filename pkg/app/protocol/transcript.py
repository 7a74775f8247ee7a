"""
Ordered record of every protocol message.

Exported as JSON lines, one record per message:
timestamp, sender, receiver, tag, digest (sha256 of the sorted-key payload
JSON), size (numeric entries) and, in debug mode only, the full payload.
"""
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import orjson

from app.protocol.messages import ProtocolMessage
from app.utils.config import TRANSCRIPT_DEBUG


@dataclass(slots=True, frozen=True)
class TranscriptRecord:
    timestamp: int
    sender: str
    receiver: str
    tag: str
    digest: str
    size: int


@dataclass(slots=True)
class ProtocolTranscript:
    records: list[TranscriptRecord] = field(default_factory=list)
    messages: list[ProtocolMessage] = field(default_factory=list)
    seeds: dict[str, int] = field(default_factory=dict)
    outcomes: dict[str, str] = field(default_factory=dict)

    def record(self, message: ProtocolMessage) -> TranscriptRecord:
        entry = TranscriptRecord(
            timestamp=message.timestamp,
            sender=message.sender,
            receiver=message.receiver,
            tag=message.tag,
            digest=message.digest(),
            size=message.size(),
        )
        self.records.append(entry)
        self.messages.append(message)
        return entry

    def tags(self) -> list[str]:
        return [r.tag for r in self.records]

    def visible_to(self, observers: Optional[set[str]]) -> list[tuple[int, ProtocolMessage]]:
        return [
            (i, m) for i, m in enumerate(self.messages)
            if observers is None or m.sender in observers or m.receiver in observers
        ]

    def lines(self, debug: bool = TRANSCRIPT_DEBUG) -> list[bytes]:
        out = []
        for entry, message in zip(self.records, self.messages):
            row = {
                "timestamp": entry.timestamp,
                "sender": entry.sender,
                "receiver": entry.receiver,
                "tag": entry.tag,
                "digest": entry.digest,
                "size": entry.size,
            }
            if debug:
                row["payload"] = orjson.loads(message.serialized_payload())
            out.append(orjson.dumps(row))
        return out

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.lines(debug=False):
            h.update(line)
            h.update(b"\n")
        return h.hexdigest()

    def export(self, path: Union[str, Path], debug: bool = TRANSCRIPT_DEBUG) -> Path:
        path = Path(path)
        path.write_bytes(b"".join(line + b"\n" for line in self.lines(debug)))
        return path
