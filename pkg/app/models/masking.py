from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import Field

from app.models.base import BaseModelSchema
from app.utils.config import (
    KEY_MEAN, KEY_VARIANCE, KEY_COND_MAX, KEY_MAX_RESAMPLES, KEY_E_FLOOR, CET_DUPLICATION,
)

InsecureVariant = Literal["no_crt", "no_cet"]


class MaskingPolicy(BaseModelSchema):
    """Distribution and conditioning rules for key generation."""
    mean: float = KEY_MEAN
    variance: float = Field(default=KEY_VARIANCE, gt=0)
    cond_max: float = Field(default=KEY_COND_MAX, gt=1)
    e_floor: float = Field(default=KEY_E_FLOOR, gt=0)
    max_resamples: int = Field(default=KEY_MAX_RESAMPLES, ge=1)
    duplication: int = Field(default=CET_DUPLICATION, ge=1)


@dataclass(slots=True, frozen=True)
class MaskingKeys:
    """Secret matrices of one BLA. V is 3qT x 3qT for duplication factor q."""
    W: np.ndarray
    E: np.ndarray
    V: np.ndarray
    seed: int

    @property
    def horizon(self) -> int:
        return self.W.shape[0]

    @property
    def duplication(self) -> int:
        return self.V.shape[0] // (3 * self.horizon)


@dataclass(slots=True, frozen=True)
class FeasibilityBlocks:
    """
    Relaxed and extended BLA constraints F·x̃ + G·u + H·w = e.

    Row layout for duplication q: q copies of the dynamics rows (T each)
    followed by q copies of the relaxed box rows (2T each).
    """
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    e: np.ndarray
    duplication: int


@dataclass(slots=True, frozen=True)
class MaskedBla:
    """Public blocks a BLA uploads: f1 = V·F, f2 = V·G, f3 = V·H, f4 = V·e."""
    bla_id: str
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    f4: np.ndarray
    duplication: int

    @property
    def horizon(self) -> int:
        return self.f1.shape[1]

    def payload_size(self) -> int:
        return self.f1.size + self.f2.size + self.f3.size + self.f4.size


@dataclass(slots=True, frozen=True)
class UnrelaxedMaskedBla:
    """Blocks uploaded when the box constraints are masked without relaxation."""
    bla_id: str
    g_rw: np.ndarray
    g_s: np.ndarray
    g_d: np.ndarray
    g_bounds: np.ndarray
    g_w: np.ndarray

    def payload_size(self) -> int:
        return self.g_rw.size + self.g_s.size + self.g_d.size + self.g_bounds.size + self.g_w.size
