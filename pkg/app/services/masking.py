"""
Masking pipeline of one BLA.

Variable remapping x = W·x̃, relaxation of the temperature box into
equalities with a positively scaled slack, duplication of the equality
block, and left-multiplication by a secret invertible V.
"""
from typing import Optional, Union

import numpy as np

from app.models.atdm import CompactBla
from app.models.masking import (
    FeasibilityBlocks,
    InsecureVariant,
    MaskedBla,
    MaskingKeys,
    MaskingPolicy,
    UnrelaxedMaskedBla,
)
from app.utils.exceptions import InvalidArgumentError, InvalidKeyError, KeyGenerationError
from app.views.reports import FeasibilityReport


def _gaussian_matrix(rng: np.random.Generator, n: int, policy: MaskingPolicy) -> np.ndarray:
    return rng.normal(policy.mean, np.sqrt(policy.variance), size=(n, n))


def _well_conditioned(rng: np.random.Generator, n: int, policy: MaskingPolicy, label: str) -> np.ndarray:
    for _ in range(policy.max_resamples):
        candidate = _gaussian_matrix(rng, n, policy)
        if np.linalg.cond(candidate) <= policy.cond_max:
            return candidate
    raise KeyGenerationError(
        f"{label} exceeded condition number {policy.cond_max:g} in {policy.max_resamples} draws"
    )


def generate_keys(T: int, seed: int, policy: Optional[MaskingPolicy] = None) -> MaskingKeys:
    """Draw W (T x T), E (2T diagonal) and V (3qT x 3qT) from one seeded stream."""
    if T < 1:
        raise InvalidArgumentError(f"horizon must be at least 1, got {T}")
    policy = policy or MaskingPolicy()
    rng = np.random.default_rng(seed)
    W = _well_conditioned(rng, T, policy, "W")
    e_diag = np.maximum(np.abs(rng.normal(policy.mean, np.sqrt(policy.variance), size=2 * T)), policy.e_floor)
    V = _well_conditioned(rng, 3 * policy.duplication * T, policy, "V")
    return MaskingKeys(W=W, E=np.diag(e_diag), V=V, seed=seed)


def derive_key_seeds(seed: int, bla_ids) -> dict[str, int]:
    """One independent key seed per BLA, spawned from a single run seed."""
    children = np.random.SeedSequence(seed).spawn(len(bla_ids))
    return {bla_id: int(child.generate_state(1)[0]) for bla_id, child in zip(bla_ids, children)}


def identity_keys(T: int, duplication: int = 2) -> MaskingKeys:
    """Keys that mask nothing; negative control for the audits."""
    return MaskingKeys(W=np.eye(T), E=np.eye(2 * T), V=np.eye(3 * duplication * T), seed=-1)


def bound_vector(c: CompactBla) -> np.ndarray:
    T = c.horizon
    return np.concatenate([np.full(T, c.x_hi), np.full(T, -c.x_lo)])


def build_blocks(c: CompactBla, k: MaskingKeys) -> FeasibilityBlocks:
    T = c.horizon
    if k.W.shape != (T, T) or k.E.shape != (2 * T, 2 * T) or k.V.shape[0] % (3 * T):
        raise InvalidArgumentError(
            f"keys sized for horizon {k.horizon} do not fit a BLA model with horizon {T}"
        )
    q = k.duplication
    D = np.vstack([k.W, -k.W])
    RW = c.R @ k.W
    x_bd = bound_vector(c)

    F = np.vstack([RW] * q + [D] * q)
    G = np.vstack([c.S] * q + [np.zeros((2 * T * q, T))])
    H = np.vstack([np.zeros((T * q, 2 * T))] + [k.E] * q)
    e = np.concatenate([c.d] * q + [x_bd] * q)
    return FeasibilityBlocks(F=F, G=G, H=H, e=e, duplication=q)


def _check_invertible(V: np.ndarray, cond_max: float) -> None:
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise InvalidKeyError(f"masking matrix must be square, got {V.shape}")
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > cond_max:
        raise InvalidKeyError(f"masking matrix is singular or ill-conditioned (cond={cond:.3g})")


def apply_te2(b: FeasibilityBlocks, V: np.ndarray, bla_id: str = "", cond_max: float = 1e12) -> MaskedBla:
    if V.shape[0] != b.F.shape[0]:
        raise InvalidArgumentError(f"masking matrix {V.shape} does not match {b.F.shape[0]} block rows")
    _check_invertible(V, cond_max)
    return MaskedBla(
        bla_id=bla_id,
        f1=V @ b.F,
        f2=V @ b.G,
        f3=V @ b.H,
        f4=V @ b.e,
        duplication=b.duplication,
    )


def mask(c: CompactBla, k: MaskingKeys) -> MaskedBla:
    return apply_te2(build_blocks(c, k), k.V, bla_id=c.bla_id)


def mask_insecure(
    c: CompactBla, k: MaskingKeys, variant: InsecureVariant
) -> Union[MaskedBla, UnrelaxedMaskedBla]:
    """
    Mask with one safeguard left out.

    no_cet keeps the relaxation but skips duplication; V' is the leading
    3T x 3T block of V. no_crt keeps the box as an inequality, so only a
    positive diagonal V² (from the magnitudes of V's next diagonal entries)
    can scale it; V¹ is the leading T x T block of V.
    """
    T = c.horizon
    if variant == "no_cet":
        single = MaskingKeys(W=k.W, E=k.E, V=k.V[: 3 * T, : 3 * T], seed=k.seed)
        return mask(c, single)
    if variant == "no_crt":
        V1 = k.V[:T, :T]
        _check_invertible(V1, 1e12)
        v2 = np.maximum(np.abs(np.diag(k.V)[T: 2 * T]), 1e-3)
        ones = np.ones(T)
        return UnrelaxedMaskedBla(
            bla_id=c.bla_id,
            g_rw=V1 @ c.R @ k.W,
            g_s=V1 @ c.S,
            g_d=V1 @ c.d,
            g_bounds=np.concatenate([v2 * c.x_lo * ones, v2 * c.x_hi * ones]),
            g_w=v2[:, None] * k.W,
        )
    raise InvalidArgumentError(f"unknown insecure variant {variant!r}")


def recover_state(x_tilde, W: np.ndarray) -> np.ndarray:
    x_tilde = np.asarray(x_tilde, dtype=float)
    if W.ndim != 2 or W.shape[1] != x_tilde.shape[0]:
        raise InvalidArgumentError(f"pseudo-state of length {x_tilde.shape[0]} does not fit W {W.shape}")
    return W @ x_tilde


def verify_recovered(c: CompactBla, x, u, tol: float = 1e-6) -> FeasibilityReport:
    """
    Check a recovered (x, u) against the plaintext dynamics and box.

    A pair of the wrong length yields a failing report, not an exception.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    T = c.horizon
    threshold = tol * (1.0 + float(np.max(np.abs(c.d))))
    if x.shape != (T,) or u.shape != (T,):
        return FeasibilityReport(
            bla_id=c.bla_id,
            residual_inf=float("inf"),
            bound_violation=float("inf"),
            worst_residual_period=-1,
            worst_bound_period=-1,
            threshold=threshold,
            passed=False,
            finding=f"expected state and control of length {T}, got {x.shape} and {u.shape}",
        )
    residual = c.R @ x + c.S @ u - c.d
    violation = np.maximum(np.maximum(x - c.x_hi, c.x_lo - x), 0.0)
    residual_inf = float(np.max(np.abs(residual)))
    bound_inf = float(np.max(violation))
    return FeasibilityReport(
        bla_id=c.bla_id,
        residual_inf=residual_inf,
        bound_violation=bound_inf,
        worst_residual_period=int(np.argmax(np.abs(residual))),
        worst_bound_period=int(np.argmax(violation)),
        threshold=threshold,
        passed=residual_inf <= threshold and bound_inf <= threshold,
    )
