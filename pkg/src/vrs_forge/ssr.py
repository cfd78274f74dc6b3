"""State-space orbit, clock and code-bias corrections applied to broadcast states."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import C_LIGHT
from .ephemeris import SatelliteState
from .errors import DegenerateGeometryError, StaleDataError
from .geom import sagnac_range
from .timesys import GnssTime

ORBIT_MAX_AGE = 120.0
CLOCK_MAX_AGE = 120.0
BIAS_MAX_AGE = 48 * 3600.0


def _vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(3).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class OrbitCorrection:
    """Radial, along-track and cross-track correction and its rate."""

    system: str
    prn: int
    iod: int
    t_o: GnssTime
    delta_o: np.ndarray
    delta_o_dot: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta_o", _vec3(self.delta_o, "delta_o"))
        object.__setattr__(self, "delta_o_dot", _vec3(self.delta_o_dot, "delta_o_dot"))
        if np.linalg.norm(self.delta_o) > 100.0:
            raise ValueError("orbit correction exceeds 100 m")
        if np.linalg.norm(self.delta_o_dot) > 1.0:
            raise ValueError("orbit correction rate exceeds 1 m/s")


@dataclass(frozen=True)
class ClockCorrection:
    system: str
    prn: int
    iod: int
    t_c: GnssTime
    c0: float
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self) -> None:
        if not abs(self.c0) <= 60.0:
            raise ValueError(f"clock correction C0 exceeds 60 m: {self.c0}")


@dataclass(frozen=True)
class CodeBias:
    system: str
    prn: int
    obs_type: str
    bias: float
    time: Optional[GnssTime] = None

    def __post_init__(self) -> None:
        if not abs(self.bias) <= 30.0:
            raise ValueError(f"code bias exceeds 30 m: {self.bias}")


@dataclass(frozen=True)
class CorrectedSatellite:
    position_tilde: np.ndarray
    ephem_range_error: float
    clock_error_correction: float
    clock_correction_m: float


def radial_along_cross_frame(state: SatelliteState) -> np.ndarray:
    """Rows: radial, along-track, cross-track unit vectors in ECEF."""
    pos = np.asarray(state.position, dtype=float)
    vel = np.asarray(state.velocity, dtype=float)
    speed = np.linalg.norm(vel)
    normal = np.cross(pos, vel)
    normal_norm = np.linalg.norm(normal)
    if speed == 0.0 or normal_norm <= 1e-12 * speed * np.linalg.norm(pos):
        raise DegenerateGeometryError("position and velocity are parallel or zero")
    along = vel / speed
    cross = normal / normal_norm
    radial = np.cross(along, cross)
    return np.vstack([radial, along, cross])


def _age(t: GnssTime, ref: GnssTime, max_age: float, what: str) -> float:
    age = t.diff_wrapped(ref.to_system(t.system))
    if abs(age) > max_age:
        raise StaleDataError(f"{what} is {age:.1f} s from its reference time (limit {max_age:.0f} s)")
    return age


def apply_orbit_correction(
    state: SatelliteState,
    corr: OrbitCorrection,
    t: GnssTime,
    eph_iod: Optional[int] = None,
    max_age: float = ORBIT_MAX_AGE,
) -> np.ndarray:
    """Corrected position: broadcast position minus the rotated correction."""
    if eph_iod is not None and eph_iod != corr.iod:
        raise StaleDataError(f"orbit correction IOD {corr.iod} does not match ephemeris IOD {eph_iod}")
    age = _age(t, corr.t_o, max_age, "orbit correction")
    delta = corr.delta_o + corr.delta_o_dot * age
    return np.asarray(state.position, dtype=float) - radial_along_cross_frame(state).T @ delta


def ephemeris_range_error(base, p_tilde, p_hat) -> float:
    return sagnac_range(base, p_tilde) - sagnac_range(base, p_hat)


def clock_correction_value(
    corr: ClockCorrection,
    t_s: GnssTime,
    max_age: float = CLOCK_MAX_AGE,
    linear_c2: bool = False,
) -> float:
    """Clock correction in metres; ``linear_c2`` drops the square on the C2 term."""
    dt = _age(t_s, corr.t_c, max_age, "clock correction")
    c2_term = corr.c2 * dt if linear_c2 else corr.c2 * dt * dt
    return corr.c0 + corr.c1 * dt + c2_term


def clock_error_correction(delta_c: float) -> float:
    """Clock correction in seconds, -dC/c."""
    return -delta_c / C_LIGHT


def apply_code_bias(observation: float, bias: CodeBias) -> float:
    return observation - bias.bias


def bias_is_current(bias: CodeBias, t: GnssTime, max_age: float = BIAS_MAX_AGE) -> bool:
    if bias.time is None:
        return True
    return abs(t.diff_wrapped(bias.time.to_system(t.system))) <= max_age


def correct_satellite(
    base,
    state: SatelliteState,
    t_s: GnssTime,
    orbit: OrbitCorrection,
    clock: ClockCorrection,
    eph_iod: Optional[int] = None,
    orbit_max_age: float = ORBIT_MAX_AGE,
    clock_max_age: float = CLOCK_MAX_AGE,
    linear_c2: bool = False,
) -> CorrectedSatellite:
    if eph_iod is not None and clock.iod != eph_iod:
        raise StaleDataError(f"clock correction IOD {clock.iod} does not match ephemeris IOD {eph_iod}")
    p_tilde = apply_orbit_correction(state, orbit, t_s, eph_iod, orbit_max_age)
    delta_c = clock_correction_value(clock, t_s, clock_max_age, linear_c2)
    return CorrectedSatellite(
        position_tilde=p_tilde,
        ephem_range_error=ephemeris_range_error(base, p_tilde, state.position),
        clock_error_correction=clock_error_correction(delta_c),
        clock_correction_m=delta_c,
    )


