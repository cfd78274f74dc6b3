"""Newton solution of the signal propagation time between a satellite and a base."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .constants import C_LIGHT, OMEGA_IE, SYSTEM_PARAMS
from .ephemeris import (
    DEFAULT_VALIDITY,
    BroadcastEphemeris,
    ClockModel,
    SatelliteState,
    check_usable,
    clock_drift,
)
from .errors import ConvergenceError, DegenerateGeometryError
from .geom import sagnac_range
from .timesys import GnssTime

T_P_INIT = 0.067
TOLERANCE = 1e-11
MAX_ITER = 20
MIN_SLOPE = 1e-3

# Maps a pseudo-transmit time to the clock offset there and the position and
# velocity at the corrected transmit time.
SatelliteStateProvider = Callable[[GnssTime], SatelliteState]


@dataclass(frozen=True)
class SolveResult:
    t_p: float
    t_g: float
    t_hat: GnssTime
    t_bar: GnssTime
    state: SatelliteState
    iterations: int
    final_residual: float


@dataclass(frozen=True)
class SensitivityBound:
    timing_error_bound: float
    position_shift_bound: float


def _check_tp(t_p: float) -> None:
    if not 0.0 < t_p < 0.5:
        raise ValueError(f"propagation time must lie in (0, 0.5) s, got {t_p}")


def range_error(t_p: float, base, t_b: GnssTime, provider: SatelliteStateProvider) -> float:
    """Geometric range minus the range implied by the propagation time, in metres."""
    _check_tp(t_p)
    state = provider(t_b - t_p)
    return sagnac_range(base, state.position) - C_LIGHT * (t_p + state.clock_offset)


def _slope(base, state: SatelliteState, drift: float) -> float:
    los = state.position - np.asarray(base, dtype=float)
    los /= np.linalg.norm(los)
    return -(float(los @ state.velocity) + C_LIGHT) * (1.0 - drift)


def range_error_derivative(
    t_p: float, base, t_b: GnssTime, provider: SatelliteStateProvider, clk: ClockModel
) -> float:
    """d(range_error)/d(t_p) in m/s."""
    _check_tp(t_p)
    t_hat = t_b - t_p
    return _slope(base, provider(t_hat), clock_drift(clk, t_hat.to_system(clk.toc.system)))


def solve_satellite_state(
    base, t_b: GnssTime, provider: SatelliteStateProvider, clk: ClockModel
) -> SolveResult:
    """Newton iteration from t_p = 0.067 s until successive iterates differ by <= 1e-11 s."""
    base = np.asarray(base, dtype=float)
    t_p = T_P_INIT
    prev = 0.0
    iterations = 0
    while abs(prev - t_p) > TOLERANCE:
        if iterations >= MAX_ITER:
            raise ConvergenceError(f"no convergence in {MAX_ITER} iterations (t_p={t_p})")
        t_hat = t_b - t_p
        state = provider(t_hat)
        f = sagnac_range(base, state.position) - C_LIGHT * (t_p + state.clock_offset)
        df = _slope(base, state, clock_drift(clk, t_hat.to_system(clk.toc.system)))
        iterations += 1
        if abs(df) < MIN_SLOPE:
            raise DegenerateGeometryError(f"range-error slope vanished ({df} m/s)")
        prev = t_p
        t_p = t_p - f / df

    t_hat = t_b - t_p
    state = provider(t_hat)
    residual = sagnac_range(base, state.position) - C_LIGHT * (t_p + state.clock_offset)
    return SolveResult(
        t_p=t_p,
        t_g=t_p + state.clock_offset,
        t_hat=t_hat,
        t_bar=t_hat - state.clock_offset,
        state=state,
        iterations=iterations,
        final_residual=residual,
    )


def solve_ephemeris(
    base,
    t_b: GnssTime,
    eph: BroadcastEphemeris,
    clk: ClockModel,
    validity: float = DEFAULT_VALIDITY,
) -> SolveResult:
    """Same iteration as ``solve_satellite_state`` run inside the compiled kernel."""
    base = np.asarray(base, dtype=float)
    t_local = t_b.to_system(eph.system)
    tb_toe = check_usable(eph, t_local, validity)
    tb_toc = t_local.diff_wrapped(clk.toc)
    p = SYSTEM_PARAMS[eph.system]
    t_p, dt, pos, vel, iters, residual, status = kernels.solve_transmit(
        base, tb_toe, tb_toc, eph.params, clk.a0, clk.a1, clk.a2,
        p.mu, p.omega_e, eph.is_beidou_geo, p.f_rel,
        C_LIGHT, OMEGA_IE, TOLERANCE, MAX_ITER,
    )
    if status == kernels.SOLVE_MAX_ITER:
        raise ConvergenceError(f"no convergence in {MAX_ITER} iterations for {eph.system}{eph.prn:02d}")
    if status == kernels.SOLVE_DEGENERATE:
        raise DegenerateGeometryError("range-error slope vanished")
    if status != kernels.SOLVE_OK:
        raise ConvergenceError(f"Kepler equation did not converge for {eph.system}{eph.prn:02d}")
    t_hat = t_local - t_p
    return SolveResult(
        t_p=float(t_p),
        t_g=float(t_p + dt),
        t_hat=t_hat,
        t_bar=t_hat - dt,
        state=SatelliteState(pos, vel, float(dt)),
        iterations=int(iters),
        final_residual=float(residual),
    )


def transmit_sensitivity(state: SatelliteState, timing_error: float) -> SensitivityBound:
    """Position shift caused by evaluating the orbit ``timing_error`` seconds off."""
    if not abs(timing_error) <= 1e-6:
        raise ValueError("timing error must be at most 1 microsecond")
    speed = float(np.linalg.norm(state.velocity))
    return SensitivityBound(abs(timing_error), speed * abs(timing_error))


__all__ = [
    "SatelliteStateProvider",
    "SensitivityBound",
    "SolveResult",
    "range_error",
    "range_error_derivative",
    "solve_ephemeris",
    "solve_satellite_state",
    "transmit_sensitivity",
]
