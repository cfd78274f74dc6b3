"""Synthetic but realistic correction products for demos, tests and replays.

Walker-style GPS, Galileo and BeiDou constellations (BeiDou with GEO and IGSO
members), SSR orbit/clock streams, code biases, a regional troposphere grid
and spherical-harmonic plus gridded VTEC.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .constants import BEIDOU, C_LIGHT, DEFAULT_SIGNALS, GALILEO, GPS, SYSTEM_PARAMS
from .ephemeris import BroadcastEphemeris, ClockModel, beidou_iod
from .geom import GeodeticPosition, geodetic_to_ecef, ned_rotation
from .ionosphere import PiercePoint, VtecGrid, VtecShModel, vtec_sh
from .records import (
    TimedRecord,
    bias_record,
    clock_record,
    eph_record,
    orbit_record,
    tropo_grid_record,
    vtec_grid_record,
    vtec_sh_record,
    write_records,
)
from .replay import MANIFEST, ReplayTimeline, integer_epochs
from .ssr import ClockCorrection, CodeBias, OrbitCorrection
from .timesys import GnssTime
from .troposphere import IggTropGrid

BDS_MEO_PRNS = tuple(range(19, 31)) + tuple(range(32, 38)) + tuple(range(41, 47))
BDS_IGSO_PRNS = (6, 7, 8, 9, 10)
BDS_GEO_LONGITUDES = {1: 140.0, 2: 80.0, 3: 110.5, 4: 160.0, 5: 58.75}


@dataclass(frozen=True)
class ScenarioSpec:
    week: int = 2300
    start_tow: float = 345600.0
    epochs: int = 60
    base_lat_deg: float = 40.0
    base_lon_deg: float = 116.0
    base_alt: float = 50.0
    rover_offset_ned: tuple = (300.0, 200.0, 0.0)
    systems: tuple = (GPS, GALILEO, BEIDOU)
    orbit_m: float = 2.0
    clock_ns: float = 5.0
    bias_ns: float = 20.0
    ztd_m: float = 2.3
    vtec_tecu: float = 10.0
    ssr_interval: int = 5
    vtec_interval: int = 30
    seed: int = 7
    signals: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_SIGNALS.items()})

    @property
    def start(self) -> GnssTime:
        return GnssTime.normalized(GPS, self.week, self.start_tow)

    @property
    def base(self) -> np.ndarray:
        return geodetic_to_ecef(GeodeticPosition.from_degrees(self.base_lat_deg, self.base_lon_deg, self.base_alt))

    @property
    def rover(self) -> np.ndarray:
        g = GeodeticPosition.from_degrees(self.base_lat_deg, self.base_lon_deg, self.base_alt)
        return self.base + ned_rotation(g.lat, g.lon).T @ np.asarray(self.rover_offset_ned, dtype=float)


@dataclass
class Scenario:
    spec: ScenarioSpec
    static: list[TimedRecord]
    timed: list[TimedRecord]
    epochs: list[GnssTime]

    def timeline(self) -> ReplayTimeline:
        return ReplayTimeline.build(self.static + self.timed, self.epochs)


def _toe(t: GnssTime, system: str) -> GnssTime:
    local = t.to_system(system)
    step = 3600.0 if system == BEIDOU else 7200.0
    return GnssTime(system, local.week, math.floor(local.tow / step) * step)


def _orbit(system: str, prn: int, toe: GnssTime, rng: np.random.Generator, **kw) -> BroadcastEphemeris:
    small = rng.uniform
    params = dict(
        delta_n=small(3.5e-9, 5.0e-9),
        idot=small(-3e-10, 3e-10),
        omegadot=small(-8.5e-9, -7.5e-9),
        cuc=small(-5e-6, 5e-6),
        cus=small(-5e-6, 5e-6),
        cic=small(-2e-7, 2e-7),
        cis=small(-2e-7, 2e-7),
        crc=small(100.0, 300.0),
        crs=small(-100.0, 100.0),
    )
    params.update(kw)
    iod = beidou_iod(int(toe.tow)) if system == BEIDOU else int(toe.tow // 7200) % 256
    return BroadcastEphemeris(system=system, prn=prn, iod=iod, toe=toe, **params)


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def constellation(system: str, t: GnssTime, rng: np.random.Generator) -> list[tuple[BroadcastEphemeris, ClockModel]]:
    toe = _toe(t, system)
    we = SYSTEM_PARAMS[system].omega_e
    out = []

    def clock() -> ClockModel:
        return ClockModel(rng.uniform(-3e-4, 3e-4), rng.uniform(-5e-12, 5e-12), 0.0, toe)

    def walker(prns: Sequence[int], planes: int, sqrt_a: float, inc_deg: float, e_max: float, phase: float):
        per_plane = len(prns) // planes
        for k, prn in enumerate(prns):
            plane, slot = divmod(k, per_plane)
            eph = _orbit(
                system, prn, toe, rng,
                sqrt_a=sqrt_a + rng.uniform(-0.5, 0.5),
                e=rng.uniform(0.1 * e_max, e_max),
                i0=math.radians(inc_deg + rng.uniform(-1.0, 1.0)),
                omega0=_wrap(2.0 * math.pi * plane / planes + rng.uniform(-0.02, 0.02)),
                omega=rng.uniform(-math.pi, math.pi),
                m0=0.0,
            )
            # Place the satellite's argument of latitude on its Walker slot.
            u = 2.0 * math.pi * slot / per_plane + phase * plane
            eph = _replace_eph(eph, m0=_wrap(u - eph.omega))
            out.append((eph, clock()))

    if system == GPS:
        walker(range(1, 25), 6, 5153.7, 55.0, 0.015, math.radians(15.0))
    elif system == GALILEO:
        walker(range(1, 25), 3, 5440.6, 56.0, 0.0006, math.radians(15.0))
    elif system == BEIDOU:
        walker(BDS_MEO_PRNS, 3, 5282.6, 55.0, 0.002, math.radians(15.0))
        for k, prn in enumerate(BDS_IGSO_PRNS):
            lon0 = math.radians(118.0)
            eph = _orbit(system, prn, toe, rng, sqrt_a=6493.5 + rng.uniform(-0.5, 0.5), e=rng.uniform(0.001, 0.005),
                         i0=math.radians(55.0), omega0=_wrap(lon0 + we * toe.tow + 2.0 * math.pi * (k % 3) / 3.0),
                         omega=rng.uniform(-math.pi, math.pi), m0=0.0, omegadot=rng.uniform(-2e-9, -1e-9))
            out.append((_replace_eph(eph, m0=_wrap(2.0 * math.pi * k / 5.0 - eph.omega)), clock()))
        for prn, lon in BDS_GEO_LONGITUDES.items():
            eph = _orbit(system, prn, toe, rng, sqrt_a=6493.45 + rng.uniform(-0.3, 0.3), e=rng.uniform(1e-4, 5e-4),
                         i0=math.radians(5.0 + rng.uniform(0.5, 1.5)), omega0=_wrap(math.pi + we * toe.tow),
                         omega=rng.uniform(-math.pi, math.pi), m0=0.0, delta_n=rng.uniform(-1e-10, 1e-10),
                         omegadot=rng.uniform(-1e-9, 1e-9), crc=rng.uniform(-50.0, 50.0))
            out.append((_replace_eph(eph, m0=_wrap(math.radians(lon) - math.pi - eph.omega)), clock()))
    else:
        raise ValueError(f"unknown constellation {system!r}")
    out.sort(key=lambda pair: pair[0].prn)
    return out


def _replace_eph(eph: BroadcastEphemeris, **changes) -> BroadcastEphemeris:
    fields = {name: getattr(eph, name) for name in eph.__dataclass_fields__ if name != "params"}
    fields.update(changes)
    return BroadcastEphemeris(**fields)


def regional_tropo_grid(spec: ScenarioSpec, rng: np.random.Generator, span_deg: float = 10.0,
                        step_deg: float = 2.5) -> IggTropGrid:
    lat0 = math.floor((spec.base_lat_deg - span_deg) / step_deg) * step_deg
    lon0 = math.floor((spec.base_lon_deg - span_deg) / step_deg) * step_deg
    n = int(round(2 * span_deg / step_deg)) + 2
    lats = lat0 + step_deg * np.arange(n)
    lons = lon0 + step_deg * np.arange(n)
    shape = (n, n)
    alpha = np.zeros(shape + (3,))
    # a0(h) = exp(alpha0 + alpha1 h + alpha2 h^2), h in km: ~2.3 m at sea level, scale height ~8 km.
    alpha[..., 0] = math.log(spec.ztd_m) + rng.uniform(-0.01, 0.01, shape)
    alpha[..., 1] = -0.125 + rng.uniform(-0.003, 0.003, shape)
    alpha[..., 2] = 0.0015 + rng.uniform(-1e-4, 1e-4, shape)
    beta = np.zeros(shape + (4, 6))
    beta[..., 0, 0] = rng.uniform(-0.04, 0.04, shape)
    beta[..., 1, 0] = rng.uniform(-0.03, 0.03, shape)
    beta[..., 2, 0] = rng.uniform(-0.01, 0.01, shape)
    beta[..., 3, 0] = rng.uniform(-0.01, 0.01, shape)
    beta[..., :, 1] = rng.uniform(-2e-3, 2e-3, shape + (4,))
    degree = np.full(shape, 2)
    return IggTropGrid(lats, lons, degree, alpha, beta, np.zeros(shape), "km")


def sh_model(spec: ScenarioSpec, epoch: GnssTime, rng: np.random.Generator, degree: int = 4) -> VtecShModel:
    c = np.zeros((degree + 1, degree + 1))
    s = np.zeros((degree + 1, degree + 1))
    c[0, 0] = spec.vtec_tecu
    for n in range(1, degree + 1):
        for m in range(n + 1):
            scale = 0.15 * spec.vtec_tecu / (n + 1)
            c[n, m] = rng.uniform(-scale, scale)
            if m:
                s[n, m] = rng.uniform(-scale, scale)
    return VtecShModel(degree, degree, c, s, epoch)


def vtec_grid_from_model(model: VtecShModel, spec: ScenarioSpec, epoch: GnssTime,
                         span_deg: float = 25.0, step_deg: float = 1.0) -> VtecGrid:
    lats = np.arange(math.floor(spec.base_lat_deg - span_deg), math.ceil(spec.base_lat_deg + span_deg) + 1, step_deg)
    lons = np.arange(math.floor(spec.base_lon_deg - span_deg), math.ceil(spec.base_lon_deg + span_deg) + 1, step_deg)
    values = np.empty((lats.size, lons.size))
    for i, lat in enumerate(lats):
        for j, lon in enumerate(lons):
            pp = PiercePoint(math.radians(lat), math.radians(lon), math.pi / 2)
            values[i, j] = max(0.0, vtec_sh(model, pp, epoch.tow))
    return VtecGrid(lats, lons, values, epoch)


def build_scenario(spec: ScenarioSpec = ScenarioSpec()) -> Scenario:
    rng = np.random.default_rng(spec.seed)
    start = spec.start
    epochs = integer_epochs(spec.week, spec.start_tow, spec.epochs)
    static: list[TimedRecord] = []
    timed: list[TimedRecord] = []
    ssr_start = start - spec.ssr_interval
    n_updates = spec.epochs // spec.ssr_interval + 2

    for system in spec.systems:
        for eph, clk in constellation(system, start, rng):
            static.append(TimedRecord(None, (eph, clk), "eph"))
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            d0 = spec.orbit_m * direction
            rate = rng.uniform(-1e-3, 1e-3, 3)
            c0 = C_LIGHT * spec.clock_ns * 1e-9 * rng.choice([-1.0, 1.0]) * rng.uniform(0.8, 1.0)
            c1 = rng.uniform(-1e-4, 1e-4)
            for k in range(n_updates):
                t_gps = ssr_start + k * spec.ssr_interval
                t_sat = t_gps.to_system(system)
                dt = t_gps - ssr_start
                timed.append(TimedRecord(t_gps, OrbitCorrection(system, eph.prn, eph.iod, t_sat, d0 + rate * dt, rate), "orb"))
                timed.append(TimedRecord(t_gps, ClockCorrection(system, eph.prn, eph.iod, t_sat, c0 + c1 * dt, c1, 0.0), "clk"))
            for obs in spec.signals.get(system, ()):
                bias = C_LIGHT * spec.bias_ns * 1e-9 * rng.uniform(-1.0, 1.0)
                static.append(TimedRecord(None, CodeBias(system, eph.prn, obs, bias, start.to_system(system)), "bias"))

    static.append(TimedRecord(None, regional_tropo_grid(spec, rng), "tropo_grid"))
    model_rng = np.random.default_rng(spec.seed + 1)
    base_model = sh_model(spec, start, model_rng)
    for k in range(spec.epochs // spec.vtec_interval + 2):
        t = (start - spec.vtec_interval) + k * spec.vtec_interval
        drift = 1.0 + 0.002 * k
        model = VtecShModel(base_model.degree, base_model.order, base_model.c * drift, base_model.s * drift, t)
        timed.append(TimedRecord(t, model, "vtec_sh"))
        timed.append(TimedRecord(t, vtec_grid_from_model(model, spec, t), "vtec_grid"))
    return Scenario(spec, static, timed, epochs)


def _record_dict(rec: TimedRecord) -> dict:
    item, avail = rec.item, rec.avail
    if rec.kind == "eph":
        return eph_record(*item, avail)
    if rec.kind == "orb":
        return orbit_record(item, avail)
    if rec.kind == "clk":
        return clock_record(item, avail)
    if rec.kind == "bias":
        return bias_record(item, avail)
    if rec.kind == "vtec_sh":
        return vtec_sh_record(item, avail)
    if rec.kind == "vtec_grid":
        return vtec_grid_record(item, avail)
    if rec.kind == "tropo_grid":
        return tropo_grid_record(item)
    raise ValueError(rec.kind)


def write_scenario(scenario: Scenario, out_dir: Path, error_model: Optional[dict] = None) -> dict:
    """Write ``static/``, ``replay/`` (with manifest), ``truth.json``, ``errors.json``."""
    out_dir = Path(out_dir)
    static_dir = out_dir / "static"
    replay_dir = out_dir / "replay"
    static_dir.mkdir(parents=True, exist_ok=True)
    replay_dir.mkdir(parents=True, exist_ok=True)
    by_kind: dict[str, list[dict]] = {}
    for rec in scenario.static:
        by_kind.setdefault(rec.kind, []).append(_record_dict(rec))
    for kind, recs in by_kind.items():
        write_records(static_dir / f"{kind}.jsonl", recs)
    timed = sorted(scenario.timed, key=lambda r: (r.avail.week, r.avail.tow))
    by_kind = {}
    for rec in timed:
        by_kind.setdefault(rec.kind, []).append(_record_dict(rec))
    for kind, recs in by_kind.items():
        write_records(replay_dir / f"{kind}.jsonl", recs)
    spec = scenario.spec
    (replay_dir / MANIFEST).write_text(json.dumps(
        {"week": spec.week, "start_tow": spec.start_tow, "epochs": spec.epochs}, indent=2) + "\n")
    truth = {"base": spec.base.tolist(), "position": spec.rover.tolist()}
    (out_dir / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    (out_dir / "errors.json").write_text(json.dumps(error_model or {}, indent=2) + "\n")
    (out_dir / "scenario.json").write_text(json.dumps(asdict(spec), indent=2) + "\n")
    return {"static": static_dir, "replay": replay_dir, "truth": out_dir / "truth.json",
            "errors": out_dir / "errors.json"}
