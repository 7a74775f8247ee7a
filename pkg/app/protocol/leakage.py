"""
Leakage scan over a protocol transcript.

Every numeric payload field is compared against the private artifacts of
each BLA: any payload row equal to a secret row, and any nonzero payload
entry equal to a private scalar parameter, counts as a match.
"""
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from app.models.atdm import CompactBla
from app.models.masking import MaskingKeys
from app.protocol.transcript import ProtocolTranscript
from app.services.masking import bound_vector
from app.views.reports import LeakageMatch, LeakageReport


@dataclass(slots=True, frozen=True)
class BlaSecrets:
    compact: CompactBla
    keys: MaskingKeys
    x: Optional[np.ndarray] = None

    @property
    def bla_id(self) -> str:
        return self.compact.bla_id

    def rows(self) -> dict[str, np.ndarray]:
        """Named secret row sets, each a 2-D array."""
        c, k = self.compact, self.keys
        rows = {
            "R": c.R,
            "S": c.S,
            "d": c.d[None, :],
            "bounds": bound_vector(c)[None, :],
            "W": k.W,
            "-W": -k.W,
            "E": k.E,
            "V": k.V,
        }
        if self.x is not None:
            rows["x"] = np.asarray(self.x, dtype=float)[None, :]
        return rows

    def scalars(self) -> np.ndarray:
        """Private parameter values: model coefficients, d entries and the bounds."""
        c = self.compact
        values = np.concatenate([c.R[np.tril_indices_from(c.R, -1)], c.S.ravel(), c.d, [c.x_hi, c.x_lo]])
        values = values[np.abs(values) > 0]
        # unit-diagonal and sign-only entries carry nothing private
        return np.unique(values[np.abs(np.abs(values) - 1.0) > 0])


def _payload_rows(values: np.ndarray) -> Iterable[np.ndarray]:
    if values.ndim == 1:
        yield values
    elif values.ndim == 2:
        yield from values


def inspect_transcript(
    t: ProtocolTranscript,
    secrets: Sequence[BlaSecrets],
    observers: Optional[Iterable[str]] = None,
    tol: float = 1e-9,
) -> LeakageReport:
    """
    Scan the messages an observer set sees (all of them when `observers` is
    None, the eavesdropper view) for plaintext secrets of the given BLAs.
    """
    observer_set = set(observers) if observers is not None else None
    matches: list[LeakageMatch] = []
    visible = t.visible_to(observer_set)
    secret_rows = [(s.bla_id, name, rows) for s in secrets for name, rows in s.rows().items()]
    secret_scalars = [(s.bla_id, s.scalars()) for s in secrets]

    for index, message in visible:
        for field_name, values in message.numeric_fields().items():
            for row in _payload_rows(values):
                for bla_id, name, rows in secret_rows:
                    if rows.shape[1] != row.shape[0]:
                        continue
                    informative = np.max(np.abs(rows), axis=1) > tol
                    close = np.all(np.abs(rows - row) <= tol, axis=1) & informative
                    if close.any():
                        matches.append(LeakageMatch(index, message.tag, field_name, f"{bla_id}.{name}", "row"))
            entries = values.ravel()
            entries = entries[np.abs(entries) > tol]
            for bla_id, scalars in secret_scalars:
                if scalars.size and entries.size:
                    hit = np.min(np.abs(entries[:, None] - scalars[None, :]), axis=0) <= tol
                    if hit.any():
                        matches.append(LeakageMatch(index, message.tag, field_name, f"{bla_id}.parameters", "value"))

    return LeakageReport(
        messages_scanned=len(visible),
        matches=matches,
        observers=sorted(observer_set) if observer_set is not None else None,
    )
