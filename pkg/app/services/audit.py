"""
Privacy audit of the masking scheme.

count_inference reproduces the equation/unknown accounting for the full
scheme and the two insecure variants; structural_counts recounts the same
quantities from actual block shapes. empirical_attack plays a concrete
attacker against uploaded blocks: alternating least squares over V and a
structured block template (q untied copies), plus one structured fit to the
row space of f1..f4, each scored by how close the implied R, S, d come to
the truth.
"""
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from app.models.atdm import CompactBla
from app.models.masking import MaskedBla, MaskingKeys
from app.services.atdm import lambda_matrix
from app.services.masking import generate_keys, identity_keys, mask, mask_insecure
from app.utils.exceptions import InvalidArgumentError
from app.views.reports import AttackReport, ControlExposure, CountReport, MaskingDistance

Scheme = Literal["full", "no_cet", "no_crt"]

FIT_TOLERANCE = 1e-6
RECOVERY_TOLERANCE = 0.01


def _verdict(equations: int, unknowns: int) -> str:
    if equations > unknowns:
        return "over_determined"
    if equations < unknowns:
        return "under_determined"
    return "square"


def count_inference(T: int, M: int, scheme: Scheme = "full", duplication: int = 2) -> CountReport:
    """
    Closed-form counts of the attacker's inference system.

    The full scheme counts the unknowns of V alone, which already exceed the
    equations; the inventory lists every private unknown for reference. The
    no_crt inventory has a T-entry V² (one scale per period, shared by both
    bounds) while `unknowns` keeps the published 2T²+3T+2M+3.
    """
    if T < 1 or M < 1:
        raise InvalidArgumentError(f"counts need T >= 1 and M >= 1, got T={T}, M={M}")
    if duplication < 1:
        raise InvalidArgumentError(f"duplication must be at least 1, got {duplication}")
    private = {"W": T * T, "E": 2 * T, "R": M, "S": M + 1, "d": T, "bounds": 2}

    if scheme == "full":
        n = 3 * duplication * T
        equations = n * (4 * T + 1)
        inventory = {"V": n * n, **private}
        unknowns = n * n
        q = duplication
    elif scheme == "no_cet":
        equations = 3 * T * (4 * T + 1)
        inventory = {"V": 9 * T * T, **private}
        unknowns = sum(inventory.values())
        q = 1
    elif scheme == "no_crt":
        equations = 3 * T * T + 3 * T
        inventory = {"V1": T * T, "V2": T, "W": T * T, "R": M, "S": M + 1, "d": T, "bounds": 2}
        unknowns = 2 * T * T + 3 * T + 2 * M + 3
        q = 1
    else:
        raise InvalidArgumentError(f"unknown scheme {scheme!r}")

    return CountReport(
        scheme=scheme,
        T=T,
        M=M,
        duplication=q,
        equations=equations,
        unknowns=unknowns,
        verdict=_verdict(equations, unknowns),
        inventory=inventory,
    )


def _random_model(T: int, M: int, rng: np.random.Generator) -> CompactBla:
    alpha = rng.uniform(0.5, 1.0, M)
    beta = rng.uniform(0.001, 0.01, M + 1)
    R = np.eye(T)
    S = np.zeros((T, T))
    for m in range(1, M + 1):
        if m <= T:
            R -= alpha[m - 1] * lambda_matrix(m, T)
    for m in range(M + 1):
        if m <= T:
            S -= beta[m] * lambda_matrix(m, T)
    return CompactBla(bla_id="random", order=M, R=R, S=S, d=rng.normal(size=T), x_hi=26.0, x_lo=22.0)


def structural_counts(T: int, M: int, scheme: Scheme = "full", duplication: int = 2, seed: int = 0) -> tuple[int, int]:
    """(equations, unknowns) recounted from the shapes of actually built blocks."""
    c = _random_model(T, M, np.random.default_rng(seed))
    params = M + (M + 1) + T + 2
    if scheme == "full":
        keys = identity_keys(T, duplication)
        return mask(c, keys).payload_size(), keys.V.size
    keys = identity_keys(T, 1)
    if scheme == "no_cet":
        masked = mask_insecure(c, keys, "no_cet")
        return masked.payload_size(), masked.f1.shape[0] ** 2 + keys.W.size + 2 * T + params
    if scheme == "no_crt":
        masked = mask_insecure(c, keys, "no_crt")
        v2 = masked.g_bounds.shape[0] // 2
        return masked.payload_size(), masked.g_rw.shape[0] ** 2 + v2 + keys.W.size + params
    raise InvalidArgumentError(f"unknown scheme {scheme!r}")


@dataclass(slots=True, frozen=True)
class AttackHints:
    """What the attacker knows from the public protocol."""
    T: int
    M: int
    duplication: int = 2


@dataclass(slots=True)
class _Template:
    alpha: np.ndarray
    W: np.ndarray
    beta: np.ndarray
    d: np.ndarray
    e: np.ndarray
    x_hi: float
    x_lo: float

    def R(self) -> np.ndarray:
        T = self.W.shape[0]
        R = np.eye(T)
        for m, a in enumerate(self.alpha, start=1):
            if m < T:
                R -= a * lambda_matrix(m, T)
        return R

    def S(self) -> np.ndarray:
        T = self.W.shape[0]
        S = np.zeros((T, T))
        for m, b in enumerate(self.beta):
            if m < T:
                S -= b * lambda_matrix(m, T)
        return S

    def rows(self) -> tuple[np.ndarray, np.ndarray]:
        T = self.W.shape[0]
        dyn = np.hstack([self.R() @ self.W, self.S(), np.zeros((T, 2 * T)), self.d[:, None]])
        bounds = np.concatenate([np.full(T, self.x_hi), np.full(T, -self.x_lo)])
        box = np.hstack([np.vstack([self.W, -self.W]), np.zeros((2 * T, T)), np.diag(self.e), bounds[:, None]])
        return dyn, box


def _structure(templates: list[_Template]) -> np.ndarray:
    pairs = [t.rows() for t in templates]
    return np.vstack([dyn for dyn, _ in pairs] + [box for _, box in pairs])


def _v_step(B: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares V with V·B ≈ f and the relative residual."""
    Vt, *_ = np.linalg.lstsq(B.T, f.T, rcond=None)
    V = Vt.T
    return V, float(np.linalg.norm(V @ B - f) / np.linalg.norm(f))


def _band_mean(A: np.ndarray, m: int) -> float:
    band = np.diagonal(A, offset=-m)
    return float(band.mean()) if band.size else 0.0


def _fit_direct(f: np.ndarray, T: int, M: int, q: int) -> list[_Template]:
    """Read the template off f as if no TE-II had been applied."""
    templates = []
    for j in range(q):
        dyn = f[j * T:(j + 1) * T]
        box = f[q * T + 2 * T * j: q * T + 2 * T * (j + 1)]
        W = (box[:T, :T] - box[T:, :T]) / 2.0
        Rt, *_ = np.linalg.lstsq(W.T, dyn[:, :T].T, rcond=None)
        R = Rt.T
        templates.append(_Template(
            alpha=np.array([-_band_mean(R, m) for m in range(1, M + 1)]),
            W=W,
            beta=np.array([-_band_mean(dyn[:, T:2 * T], m) for m in range(M + 1)]),
            d=dyn[:, 4 * T].copy(),
            e=np.diag(box[:, 2 * T:4 * T]).copy(),
            x_hi=float(box[:T, 4 * T].mean()),
            x_lo=float(-box[T:, 4 * T].mean()),
        ))
    return templates


def _random_template(rng: np.random.Generator, T: int, M: int) -> _Template:
    def draw(*shape):
        return rng.normal(0.1, np.sqrt(0.1), size=shape)

    return _Template(
        alpha=draw(M), W=draw(T, T), beta=draw(M + 1), d=draw(T),
        e=np.abs(draw(2 * T)), x_hi=float(draw()), x_lo=float(draw()),
    )


def _refine(f: np.ndarray, T: int, M: int) -> Optional[_Template]:
    """
    Structured template whose rows lie in the row space of f.

    Box rows first: a homogeneous system in (W, E, bounds) solved by the
    smallest right singular vector. Then the dynamics rows are linear in
    (alpha, beta, d) once W is fixed.
    """
    _, s, Vt = np.linalg.svd(f)
    rank = int(np.sum(s > s[0] * 1e-9))
    N = Vt[rank:].T
    k = N.shape[1]
    if k == 0:
        return None
    N_F, N_G, N_H, N_e = N[:T], N[T:2 * T], N[2 * T:4 * T], N[4 * T:4 * T + 1]
    ones = np.tile(N_e[0], T)

    w_part = np.kron(np.eye(T), N_F.T)
    e_hi = np.zeros((T * k, 2 * T))
    e_lo = np.zeros((T * k, 2 * T))
    for i in range(T):
        e_hi[i * k:(i + 1) * k, i] = N_H[i]
        e_lo[i * k:(i + 1) * k, T + i] = N_H[T + i]
    zeros = np.zeros(T * k)
    hi = np.hstack([w_part, e_hi, ones[:, None], zeros[:, None]])
    lo = np.hstack([-w_part, e_lo, zeros[:, None], -ones[:, None]])
    _, _, Pt = np.linalg.svd(np.vstack([hi, lo]))
    p = Pt[-1]
    if p[T * T:T * T + 2 * T].sum() < 0:
        p = -p
    W = p[:T * T].reshape(T, T)

    WN = W @ N_F
    columns = [-(lambda_matrix(m, T) @ WN).ravel() for m in range(1, M + 1) if m < T]
    columns += [-(lambda_matrix(m, T) @ N_G).ravel() for m in range(M + 1) if m < T]
    system = np.hstack([np.column_stack(columns), np.kron(np.eye(T), N_e.T)])
    solution, *_ = np.linalg.lstsq(system, -WN.ravel(), rcond=None)
    n_alpha = min(M, T - 1)
    n_beta = min(M + 1, T)
    alpha = np.zeros(M)
    beta = np.zeros(M + 1)
    alpha[:n_alpha] = solution[:n_alpha]
    beta[:n_beta] = solution[n_alpha:n_alpha + n_beta]
    return _Template(
        alpha=alpha, W=W, beta=beta, d=solution[n_alpha + n_beta:],
        e=p[T * T:T * T + 2 * T], x_hi=float(p[-2]), x_lo=float(p[-1]),
    )


def _aligned_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    energy = float(np.vdot(estimate, estimate))
    scale = float(np.vdot(estimate, truth)) / energy if energy > 0 else 0.0
    reference = np.linalg.norm(truth)
    gap = np.linalg.norm(scale * estimate - truth)
    return float(gap / reference) if reference > 0 else float(gap)


@dataclass(slots=True)
class _Estimate:
    residual: float
    r_error: float = float("nan")
    s_error: float = float("nan")
    d_error: float = float("nan")
    success: bool = False


def _score(templates: list[_Template], residual: float, truth: Optional[CompactBla]) -> _Estimate:
    if truth is None:
        return _Estimate(residual)
    guess = templates[0]
    r_err = float(np.linalg.norm(guess.R() - truth.R) / np.linalg.norm(truth.R))
    s_err = _aligned_error(guess.S(), truth.S)
    return _Estimate(
        residual=residual,
        r_error=r_err,
        s_error=s_err,
        d_error=_aligned_error(guess.d, truth.d),
        success=residual <= FIT_TOLERANCE and r_err <= RECOVERY_TOLERANCE and s_err <= RECOVERY_TOLERANCE,
    )


def _alternate(
    f: np.ndarray,
    templates: list[_Template],
    refined: Optional[_Template],
    T: int,
    M: int,
    max_iterations: int,
) -> tuple[list[_Template], float, int]:
    """
    Alternate the V-step with a structured template step until the fit
    tolerance is met or the residual stalls. The template step fits the
    structure to V⁻¹f; that matrix spans the row space of f, so the
    structured fit of f is used when one exists.
    """
    q = len(templates)
    previous = residual = float("inf")
    for iteration in range(1, max_iterations + 1):
        V, residual = _v_step(_structure(templates), f)
        stalled = np.isfinite(previous) and previous - residual <= 1e-12 * previous
        if residual <= FIT_TOLERANCE or stalled:
            return templates, residual, iteration
        previous = residual
        if refined is not None:
            templates = [refined] * q
        else:
            target, *_ = np.linalg.lstsq(V, f, rcond=None)
            templates = _fit_direct(target, T, M, q)
    return templates, residual, max_iterations


def empirical_attack(
    m: MaskedBla,
    structure_hints: AttackHints,
    attempts: int = 5,
    seed: int = 0,
    truth: Optional[CompactBla] = None,
    max_iterations: int = 25,
) -> AttackReport:
    """
    Fit V and the structured blocks to the uploaded f1..f4.

    Each attempt runs alternating least squares on its own RNG stream:
    attempt 0 starts from the blocks read directly off f, later attempts
    from random templates. Separately, the structured fit to the row space
    of f is always evaluated and reported on its own.
    """
    T, M, q = structure_hints.T, structure_hints.M, structure_hints.duplication
    if m.f1.shape != (3 * q * T, T):
        raise InvalidArgumentError(
            f"hints T={T}, duplication={q} do not match uploaded blocks of shape {m.f1.shape}"
        )
    if attempts < 1:
        raise InvalidArgumentError("at least one attempt is required")
    if max_iterations < 1:
        raise InvalidArgumentError("at least one iteration is required")
    f = np.hstack([m.f1, m.f2, m.f3, m.f4[:, None]])
    scheme = "full" if q > 1 else "no_cet"
    refined = _refine(f, T, M)
    streams = np.random.SeedSequence(seed).spawn(attempts)

    estimates, iterations = [], []
    for i, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        start = _fit_direct(f, T, M, q) if i == 0 else [_random_template(rng, T, M) for _ in range(q)]
        templates, residual, used = _alternate(f, start, refined, T, M, max_iterations)
        estimates.append(_score(templates, residual, truth))
        iterations.append(used)

    if refined is not None:
        _, residual = _v_step(_structure([refined] * q), f)
        structured = _score([refined], residual, truth)
    else:
        structured = _Estimate(float("nan"))

    best = int(np.argmin([e.residual for e in estimates]))
    return AttackReport(
        scheme=scheme,
        residual=estimates[best].residual,
        r_error=estimates[best].r_error,
        s_error=estimates[best].s_error,
        d_error=estimates[best].d_error,
        attempts=attempts,
        success=any(e.success for e in estimates),
        masked_rank=int(np.linalg.matrix_rank(f)),
        masked_rows=f.shape[0],
        attempt_residuals=[e.residual for e in estimates],
        attempt_r_errors=[e.r_error for e in estimates],
        attempt_s_errors=[e.s_error for e in estimates],
        attempt_successes=[e.success for e in estimates],
        attempt_iterations=iterations,
        structured_residual=structured.residual,
        structured_r_error=structured.r_error,
        structured_s_error=structured.s_error,
        structured_success=structured.success,
    )


def _unit_rows(X: np.ndarray) -> np.ndarray:
    centered = X - X.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    keep = norms > 1e-12
    return centered[keep] / norms[keep, None]


def masking_distance(original: np.ndarray, masked: np.ndarray, heatmap_rows: int = 24) -> MaskingDistance:
    """Largest |Pearson correlation| between any original and any masked row, plus value ranges."""
    original = np.atleast_2d(np.asarray(original, dtype=float))
    masked = np.atleast_2d(np.asarray(masked, dtype=float))
    if original.shape[1] != masked.shape[1]:
        raise InvalidArgumentError(f"column counts differ: {original.shape[1]} vs {masked.shape[1]}")
    a, b = _unit_rows(original), _unit_rows(masked)
    correlation = float(np.max(np.abs(a @ b.T))) if a.size and b.size else 0.0
    return MaskingDistance(
        max_abs_correlation=min(correlation, 1.0),
        original_range=(float(original.min()), float(original.max())),
        masked_range=(float(masked.min()), float(masked.max())),
        heatmap_original=original[:heatmap_rows],
        heatmap_masked=masked[:heatmap_rows],
    )


def heatmap_triplets(grid: np.ndarray) -> np.ndarray:
    """(row, col, value) records of a heatmap grid, row-major."""
    rows, cols = np.indices(grid.shape)
    return np.column_stack([rows.ravel(), cols.ravel(), grid.ravel()])


def control_mapping_exposure(c: CompactBla, keys: MaskingKeys, seed: int = 0) -> ControlExposure:
    """
    Mask u with its own map u = W_u·ũ and show the DSO undoes it.

    A·z + W_u·ũ = 0 forces W_u into the DSO's problem, so the uploaded
    V·G·W_u times W_u⁻¹ returns the same V·G as not mapping u at all.
    """
    W_u = generate_keys(c.horizon, seed).W
    seen = mask(c, keys).f2
    uploaded = seen @ W_u
    undone = np.linalg.solve(W_u.T, uploaded.T).T
    error = float(np.linalg.norm(undone - seen) / max(np.linalg.norm(seen), 1e-300))
    return ControlExposure(bla_id=c.bla_id, recovery_error=error, exposed=error <= 1e-8)
