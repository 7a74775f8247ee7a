import hashlib
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import orjson

from app.models.masking import MaskedBla

DSO = "dso"

UPLOAD_MASKED_MODEL = "upload_masked_model"
MASKED_STATE_RESULT = "masked_state_result"
DISPATCH_COMMAND = "dispatch_command"
ABORT = "abort"

TAGS = frozenset({UPLOAD_MASKED_MODEL, MASKED_STATE_RESULT, DISPATCH_COMMAND, ABORT})

# fields an upload may carry; anything else is rejected by the DSO
UPLOAD_FIELDS = frozenset({"bla_id", "f1", "f2", "f3", "f4", "duplication"})

_JSON_OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SORT_KEYS


@dataclass(slots=True, frozen=True)
class ProtocolMessage:
    sender: str
    receiver: str
    tag: str
    payload: dict[str, Any] = field(default_factory=dict)
    timestamp: int = 0

    def serialized_payload(self) -> bytes:
        return orjson.dumps(_contiguous(self.payload), option=_JSON_OPTIONS)

    def digest(self) -> str:
        return hashlib.sha256(self.serialized_payload()).hexdigest()

    def numeric_fields(self) -> dict[str, np.ndarray]:
        return {
            name: np.asarray(value, dtype=float)
            for name, value in self.payload.items()
            if isinstance(value, (np.ndarray, list)) and name != "bla_id"
        }

    def size(self) -> int:
        return sum(values.size for values in self.numeric_fields().values())


def _contiguous(payload: dict[str, Any]) -> dict[str, Any]:
    return {
        key: np.ascontiguousarray(value, dtype=float) if isinstance(value, np.ndarray) else value
        for key, value in payload.items()
    }


def upload_payload(masked: MaskedBla) -> dict[str, Any]:
    return {
        "bla_id": masked.bla_id,
        "f1": masked.f1,
        "f2": masked.f2,
        "f3": masked.f3,
        "f4": masked.f4,
        "duplication": masked.duplication,
    }


def masked_from_payload(payload: dict[str, Any]) -> MaskedBla:
    return MaskedBla(
        bla_id=payload["bla_id"],
        f1=np.asarray(payload["f1"], dtype=float),
        f2=np.asarray(payload["f2"], dtype=float),
        f3=np.asarray(payload["f3"], dtype=float),
        f4=np.asarray(payload["f4"], dtype=float),
        duplication=int(payload.get("duplication", 1)),
    )
