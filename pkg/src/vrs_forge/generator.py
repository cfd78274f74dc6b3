"""Synthetic pseudoranges for a virtual base from broadcast, SSR and atmosphere products."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .constants import C_LIGHT, DEFAULT_CONSTANTS, DEFAULT_SIGNALS, SYSTEMS, PhysicalConstants, signal_frequency
from .ephemeris import DEFAULT_VALIDITY
from .errors import BelowHorizonError, StaleDataError, VrsError
from .geom import ecef_to_geodetic, look_geometry, sagnac_range
from .ionosphere import iono_delay, pierce_point, stec_grid, stec_sh, vtec_grid, vtec_sh
from .solver import SolveResult, solve_ephemeris
from .ssr import (
    BIAS_MAX_AGE,
    CLOCK_MAX_AGE,
    ORBIT_MAX_AGE,
    bias_is_current,
    correct_satellite,
)
from .store import CorrectionStore
from .timesys import GnssTime
from .troposphere import iggtrop_coeffs, slant_tropo, ztd

log = logging.getLogger(__name__)

IONO_SOURCES = ("sh", "grid", "none")
IONO_MAPPINGS = ("sum", "standard")


@dataclass(frozen=True)
class GeneratorConfig:
    elevation_mask: float = math.radians(10.0)
    snr_slope: float = 20.0
    snr_floor: int = 30
    signals: Mapping[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_SIGNALS))
    ephemeris_max_age: float = DEFAULT_VALIDITY
    orbit_max_age: float = ORBIT_MAX_AGE
    clock_max_age: float = CLOCK_MAX_AGE
    bias_max_age: float = BIAS_MAX_AGE
    vtec_max_age: float = 600.0
    iono_source: str = "sh"
    iono_mapping: str = "sum"
    tropo: bool = True
    clock_linear_c2: bool = False
    constants: PhysicalConstants = DEFAULT_CONSTANTS

    def __post_init__(self) -> None:
        if not 0.0 <= self.elevation_mask <= math.radians(30.0):
            raise ValueError("elevation mask must lie in [0, 30] degrees")
        if not self.snr_slope > 0.0:
            raise ValueError("SNR slope must be positive")
        if self.iono_source not in IONO_SOURCES:
            raise ValueError(f"iono_source must be one of {IONO_SOURCES}")
        if self.iono_mapping not in IONO_MAPPINGS:
            raise ValueError(f"iono_mapping must be one of {IONO_MAPPINGS}")


@dataclass(frozen=True)
class VirtualObservation:
    system: str
    prn: int
    obs_type: str
    pseudorange: float
    snr: int
    lock_time: float = 0.0

    def __post_init__(self) -> None:
        if not 1.8e7 <= self.pseudorange <= 4.6e7:
            raise ValueError(f"pseudorange {self.pseudorange:.1f} m outside [1.8e7, 4.6e7]")


@dataclass(frozen=True)
class SatelliteTerms:
    """Every additive term of one satellite's synthetic pseudorange at one receiver."""

    system: str
    prn: int
    solve: SolveResult
    elevation: float
    azimuth: float
    geometric_range: float
    ephem_range_error: float
    broadcast_clock_m: float
    clock_correction_m: float
    tropo: float
    stec: float
    biases: Mapping[str, float]

    def iono(self, obs_type: str) -> float:
        return iono_delay(signal_frequency(self.system, obs_type), self.stec) if self.stec else 0.0

    def pseudorange(self, obs_type: str) -> float:
        # -c(dt - dt_hat) with dt_hat = -dC/c  ->  -c*dt - dC
        return (
            self.geometric_range
            + self.ephem_range_error
            - self.broadcast_clock_m
            - self.clock_correction_m
            + self.biases[obs_type]
            + self.tropo
            + self.iono(obs_type)
        )


def synth_snr(elevation: float, slope: float = 20.0, floor: int = 30) -> int:
    if not 0.0 <= elevation <= math.pi / 2 + 1e-12:
        raise ValueError("elevation must lie in [0, pi/2]")
    return int(math.floor(slope * elevation / math.pi)) + int(floor)


def zenith_tropo(receiver, t: GnssTime, store: CorrectionStore, cfg: GeneratorConfig) -> float:
    if not cfg.tropo:
        return 0.0
    if store.tropo_grid is None:
        raise StaleDataError("no troposphere grid loaded")
    coeffs = iggtrop_coeffs(store.tropo_grid, ecef_to_geodetic(receiver))
    return ztd(coeffs, t.to_system("G").day_of_year())


def slant_tec(receiver, satellite, t: GnssTime, store: CorrectionStore, cfg: GeneratorConfig) -> float:
    if cfg.iono_source == "none":
        return 0.0
    const = cfg.constants
    t_gps = t.to_system("G")
    if cfg.iono_source == "sh":
        model = store.vtec_sh
        if model is None or abs(t_gps - model.epoch) > cfg.vtec_max_age:
            raise StaleDataError("no current VTEC spherical-harmonic model")
        h_m = model.height if model.height is not None else const.h_m
        pp = pierce_point(receiver, satellite, h_m, const.r_e)
        return stec_sh(vtec_sh(model, pp, t_gps.tow), pp, cfg.iono_mapping, const.r_e, h_m)
    grid = store.vtec_grid
    if grid is None or abs(t_gps - grid.time) > cfg.vtec_max_age:
        raise StaleDataError("no current VTEC grid")
    pp = pierce_point(receiver, satellite, const.h_m, const.r_e)
    return stec_grid(vtec_grid(grid, pp), pp, const.r_e, const.h_m)


def satellite_terms(
    receiver,
    t: GnssTime,
    store: CorrectionStore,
    system: str,
    prn: int,
    obs_types: Sequence[str],
    cfg: GeneratorConfig,
    zenith_delay: Optional[float] = None,
) -> SatelliteTerms:
    """Solve the transmit time and evaluate every correction term for one satellite.

    Raises a ``VrsError`` subclass when any product is missing, stale or the
    satellite is below the elevation mask.
    """
    receiver = np.asarray(receiver, dtype=float)
    prod = store.products(system, prn)
    solve = solve_ephemeris(receiver, t, prod.eph, prod.clk, cfg.ephemeris_max_age)
    look = look_geometry(receiver, solve.state.position)
    if look.elevation < cfg.elevation_mask:
        raise BelowHorizonError(f"{system}{prn:02d} below elevation mask")
    corrected = correct_satellite(
        receiver, solve.state, solve.t_bar, prod.orbit, prod.clock, prod.eph.iod,
        cfg.orbit_max_age, cfg.clock_max_age, cfg.clock_linear_c2,
    )
    biases = {}
    for obs in obs_types:
        bias = store.biases.get((system, prn, obs))
        if bias is not None and bias_is_current(bias, t, cfg.bias_max_age):
            biases[obs] = bias.bias
    if zenith_delay is None:
        zenith_delay = zenith_tropo(receiver, t, store, cfg)
    tropo = slant_tropo(look.elevation, zenith_delay) if cfg.tropo else 0.0
    stec = slant_tec(receiver, solve.state.position, t, store, cfg)
    return SatelliteTerms(
        system=system,
        prn=prn,
        solve=solve,
        elevation=look.elevation,
        azimuth=look.azimuth,
        geometric_range=sagnac_range(receiver, solve.state.position),
        ephem_range_error=corrected.ephem_range_error,
        broadcast_clock_m=C_LIGHT * solve.state.clock_offset,
        clock_correction_m=corrected.clock_correction_m,
        tropo=tropo,
        stec=stec,
        biases=biases,
    )


def generate_epoch(
    base,
    t_b: GnssTime,
    store: CorrectionStore,
    cfg: GeneratorConfig = GeneratorConfig(),
    systems: Optional[Sequence[str]] = None,
    signals: Optional[Mapping[str, Sequence[str]]] = None,
    lock_time: float = 0.0,
) -> list[VirtualObservation]:
    """Observations for every usable satellite and signal, ordered by system, PRN, signal.

    An empty list is the empty-epoch signal.
    """
    if abs(t_b.tow - round(t_b.tow)) > 1e-9:
        raise ValueError(f"epochs must fall on integer seconds, got {t_b}")
    base = np.asarray(base, dtype=float)
    systems = [s for s in SYSTEMS if systems is None or s in systems]
    signals = signals if signals is not None else cfg.signals
    try:
        zenith = zenith_tropo(base, t_b, store, cfg)
    except VrsError as exc:
        log.warning("epoch %s skipped: %s", t_b, exc)
        return []
    out: list[VirtualObservation] = []
    for system in systems:
        obs_types = tuple(signals.get(system, ()))
        if not obs_types:
            continue
        for prn in store.satellites(system):
            try:
                terms = satellite_terms(base, t_b, store, system, prn, obs_types, cfg, zenith)
            except VrsError as exc:
                log.debug("excluded %s%02d at %s: %s", system, prn, t_b, exc)
                continue
            snr = synth_snr(terms.elevation, cfg.snr_slope, cfg.snr_floor)
            for obs in obs_types:
                if obs not in terms.biases:
                    log.debug("excluded %s%02d %s at %s: no code bias", system, prn, obs, t_b)
                    continue
                out.append(VirtualObservation(system, prn, obs, terms.pseudorange(obs), snr, lock_time))
    return out
