"""Broadcast ephemeris and clock evaluation for GPS, Galileo and BeiDou."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .constants import BEIDOU, BEIDOU_GEO_PRNS, SYSTEM_PARAMS
from .errors import ConvergenceError, HealthError, StaleDataError
from .timesys import GnssTime

DEFAULT_VALIDITY = 4 * 3600.0

_ORBIT_FIELDS = (
    "sqrt_a", "e", "i0", "omega0", "omega", "m0", "delta_n", "idot", "omegadot",
    "cuc", "cus", "cic", "cis", "crc", "crs",
)


@dataclass(frozen=True)
class ClockModel:
    a0: float
    a1: float
    a2: float
    toc: GnssTime

    def __post_init__(self) -> None:
        if not abs(self.a0) < 1e-2:
            raise ValueError(f"|a0| must be below 1e-2 s, got {self.a0}")
        if not abs(self.a1) <= 1e-8:
            raise ValueError(f"|a1| must be at most 1e-8, got {self.a1}")
        if not abs(self.a2) <= 1e-12:
            raise ValueError(f"|a2| must be at most 1e-12, got {self.a2}")


@dataclass(frozen=True)
class BroadcastEphemeris:
    system: str
    prn: int
    iod: int
    toe: GnssTime
    sqrt_a: float
    e: float
    i0: float
    omega0: float
    omega: float
    m0: float
    delta_n: float = 0.0
    idot: float = 0.0
    omegadot: float = 0.0
    cuc: float = 0.0
    cus: float = 0.0
    cic: float = 0.0
    cis: float = 0.0
    crc: float = 0.0
    crs: float = 0.0
    healthy: bool = True
    params: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.e < 0.1:
            raise ValueError(f"eccentricity must lie in [0, 0.1), got {self.e}")
        if not 2.0e7 <= self.sqrt_a**2 <= 4.5e7:
            raise ValueError(f"semi-major axis {self.sqrt_a**2:.0f} m outside [2.0e7, 4.5e7]")
        values = [float(getattr(self, name)) for name in _ORBIT_FIELDS]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("ephemeris parameters must be finite")
        if self.toe.system != self.system:
            raise ValueError("toe must be expressed in the satellite's own time scale")
        params = np.array(values + [self.toe.tow], dtype=float)
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    @property
    def is_beidou_geo(self) -> bool:
        return self.system == BEIDOU and self.prn in BEIDOU_GEO_PRNS

    @property
    def semi_major_axis(self) -> float:
        return self.sqrt_a**2

    def mean_motion(self) -> float:
        mu = SYSTEM_PARAMS[self.system].mu
        return math.sqrt(mu / self.semi_major_axis**3) + self.delta_n


@dataclass(frozen=True)
class SatelliteState:
    position: np.ndarray
    velocity: np.ndarray
    clock_offset: float


def kepler_solve(mean_anomaly: float, e: float) -> float:
    if not 0.0 <= e < 0.1:
        raise ValueError(f"eccentricity must lie in [0, 0.1), got {e}")
    ecc_anom = kernels.kepler(float(mean_anomaly), float(e))
    if not math.isfinite(ecc_anom):
        raise ConvergenceError(f"Kepler equation did not converge for M={mean_anomaly}, e={e}")
    return ecc_anom


def check_usable(eph: BroadcastEphemeris, t: GnssTime, validity: float = DEFAULT_VALIDITY) -> float:
    """Return t - toe after health and validity-window checks."""
    if not eph.healthy:
        raise HealthError(f"{eph.system}{eph.prn:02d} is unhealthy")
    tk = t.to_system(eph.system).diff_wrapped(eph.toe)
    if abs(tk) > validity:
        raise StaleDataError(
            f"{eph.system}{eph.prn:02d} ephemeris toe={eph.toe} is {tk:.0f} s from {t}"
        )
    return tk


def orbit_state(eph: BroadcastEphemeris, tk: float) -> tuple[np.ndarray, np.ndarray]:
    p = SYSTEM_PARAMS[eph.system]
    pos, vel, ek = kernels.orbit_state(eph.params, tk, p.mu, p.omega_e, eph.is_beidou_geo)
    if not math.isfinite(ek):
        raise ConvergenceError(f"Kepler equation did not converge for {eph.system}{eph.prn:02d}")
    return pos, vel


def clock_offset(clk: ClockModel, eph: BroadcastEphemeris, t: GnssTime) -> float:
    """Polynomial clock offset plus the eccentricity relativistic term, in seconds."""
    t = t.to_system(eph.system)
    p = SYSTEM_PARAMS[eph.system]
    ek = kepler_solve(eph.params[kernels.P_M0] + eph.mean_motion() * t.diff_wrapped(eph.toe), eph.e)
    dt = t.diff_wrapped(clk.toc)
    poly = clk.a0 + clk.a1 * dt + clk.a2 * dt * dt
    return poly + p.f_rel * eph.e * eph.sqrt_a * math.sin(ek)


def clock_drift(clk: ClockModel, t: GnssTime) -> float:
    """Derivative of the clock polynomial (relativistic term excluded)."""
    return clk.a1 + 2.0 * clk.a2 * t.diff_wrapped(clk.toc)


def eval_ephemeris(
    eph: BroadcastEphemeris,
    clk: ClockModel,
    t: GnssTime,
    validity: float = DEFAULT_VALIDITY,
) -> SatelliteState:
    """Position, velocity and clock offset, all at ``t``."""
    tk = check_usable(eph, t, validity)
    pos, vel = orbit_state(eph, tk)
    return SatelliteState(pos, vel, clock_offset(clk, eph, t))


def beidou_iod(toe_seconds: int) -> int:
    if not 0 <= toe_seconds < 604800:
        raise ValueError(f"toe out of range: {toe_seconds}")
    return (int(toe_seconds) // 720) % 240


@dataclass(frozen=True)
class EphemerisProvider:
    """State provider for the transmit-time solver backed by broadcast parameters.

    ``provider(t_hat)`` returns the clock offset at ``t_hat`` together with the
    position and velocity at ``t_hat - clock_offset``.
    """

    eph: BroadcastEphemeris
    clk: ClockModel
    validity: float = DEFAULT_VALIDITY

    def __call__(self, t_hat: GnssTime) -> SatelliteState:
        t_hat = t_hat.to_system(self.eph.system)
        check_usable(self.eph, t_hat, self.validity)
        dt = clock_offset(self.clk, self.eph, t_hat)
        pos, vel = orbit_state(self.eph, (t_hat - dt).diff_wrapped(self.eph.toe))
        return SatelliteState(pos, vel, dt)
