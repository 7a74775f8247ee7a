"""Aggregate thermal dynamic model: shift matrices, compact form, forward simulation."""
import numpy as np

from app.models.atdm import BlaParams, CompactBla, ZoneAggregation
from app.utils.exceptions import InvalidArgumentError, InvalidModelError, InvalidWeightsError


def lambda_matrix(m: int, T: int) -> np.ndarray:
    """T x T matrix with ones where row - col == m."""
    if T <= 0 or m < 0 or m > T:
        raise InvalidArgumentError(f"lambda_matrix needs 0 <= m <= T and T >= 1, got m={m}, T={T}")
    return np.eye(T, k=-m)


def _history(values: list[float], index: int) -> float:
    # index runs over 1-M..0; values are stored oldest first
    return values[len(values) - 1 + index]


def build_compact(p: BlaParams) -> CompactBla:
    problems = p.findings()
    if problems:
        raise InvalidModelError(f"BLA {p.id}: " + "; ".join(problems))
    T, M = p.horizon, p.order

    R = np.eye(T)
    S = np.zeros((T, T))
    for m in range(1, M + 1):
        R -= p.alpha[m - 1] * lambda_matrix(m, T)
    for m in range(M + 1):
        S -= p.beta[m] * lambda_matrix(m, T)

    d = np.asarray(p.gamma, dtype=float).copy()
    for t in range(1, min(M, T) + 1):
        for m in range(t, M + 1):
            d[t - 1] += p.alpha[m - 1] * _history(p.hist_x, t - m) + p.beta[m] * _history(p.hist_u, t - m)

    return CompactBla(bla_id=p.id, order=M, R=R, S=S, d=d, x_hi=float(p.temp_hi), x_lo=float(p.temp_lo))


def simulate(p: BlaParams, u) -> np.ndarray:
    """Forward recursion x^t = sum alpha^m x^{t-m} + sum beta^m u^{t-m} + gamma^t."""
    u = np.asarray(u, dtype=float)
    if u.shape != (p.horizon,):
        raise InvalidArgumentError(f"control series has shape {u.shape}, expected ({p.horizon},)")
    T, M = p.horizon, p.order
    x = np.zeros(T)

    def state(t: int) -> float:
        return x[t - 1] if t >= 1 else _history(p.hist_x, t)

    def control(t: int) -> float:
        return u[t - 1] if t >= 1 else _history(p.hist_u, t)

    for t in range(1, T + 1):
        value = p.gamma[t - 1]
        for m in range(1, M + 1):
            value += p.alpha[m - 1] * state(t - m)
        for m in range(M + 1):
            value += p.beta[m] * control(t - m)
        x[t - 1] = value
    return x


def aggregate_zones(z: ZoneAggregation) -> np.ndarray:
    """Weighted aggregate temperature per period."""
    problems = z.findings()
    if problems:
        raise InvalidWeightsError("; ".join(problems))
    temps = np.asarray(z.zone_temps, dtype=float)
    return np.asarray(z.xi, dtype=float) @ temps


def storage_like_params(
    bla_id: str,
    horizon: int,
    capacity_kwh: float,
    soc_init: float,
    soc_min: float,
    soc_max: float,
    efficiency: float = 0.95,
    self_discharge: float = 0.0,
    dt: float = 1.0,
) -> BlaParams:
    """
    First-order model of a battery or EV fleet in the BLA form.

    State is state of charge in percent, control is charging power in kW.
    """
    gain = 100.0 * efficiency * dt / capacity_kwh
    return BlaParams(
        id=bla_id,
        horizon=horizon,
        order=1,
        alpha=[1.0 - self_discharge],
        beta=[gain, 0.0],
        gamma=[0.0] * horizon,
        temp_hi=soc_max,
        temp_lo=soc_min,
        hist_x=[soc_init],
        hist_u=[0.0],
    )
