"""Rover simulator: truth pseudoranges, differential correction, least-squares fix, metrics."""

from __future__ import annotations

import json
import logging
import math
import socket
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .constants import C_LIGHT, SYSTEMS
from .errors import DegenerateGeometryError, VrsError
from .generator import GeneratorConfig, SatelliteTerms, satellite_terms
from .geom import ecef_to_geodetic, ned_error, ned_rotation, sagnac_range
from .protocol import format_request
from .replay import ReplayTimeline
from .rtcm import FrameReader, decode_msm4, message_number
from .rtcm.station import STATION_MESSAGE, decode_station
from .solver import solve_ephemeris
from .server import LiveStore
from .store import CorrectionStore
from .timesys import GnssTime, gps_time_from_unix

log = logging.getLogger(__name__)

_OMEGA_OVER_C = 7.2921151467e-5 / C_LIGHT


# Error model -------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorModel:
    """Rover-only error sources and truth-model differences.

    Clock terms are in seconds, multipath and noise in metres.
    """

    receiver_clock: float = 0.0
    receiver_clock_drift: float = 0.0
    system_bias: Mapping[str, float] = field(default_factory=dict)
    multipath_sigma: float = 0.0
    multipath_tau: float = 60.0
    noise_sigma: float = 0.0
    seed: int = 0
    iono_scale: float = 1.0
    tropo_scale: float = 1.0
    truth_iono_source: Optional[str] = None
    truth_tropo: Optional[bool] = None

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ErrorModel":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown error-model keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def load(cls, path: Optional[Path]) -> "ErrorModel":
        if path is None:
            return cls()
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def truth_config(self, cfg: GeneratorConfig) -> GeneratorConfig:
        changes = {}
        if self.truth_iono_source is not None:
            changes["iono_source"] = self.truth_iono_source
        if self.truth_tropo is not None:
            changes["tropo"] = self.truth_tropo
        return replace(cfg, **changes)


class RoverMeasurementModel:
    """Stateful rover error generator (Gauss-Markov multipath per signal, white noise)."""

    def __init__(self, errors: ErrorModel, start: Optional[GnssTime] = None) -> None:
        self.errors = errors
        self.start = start
        self.rng = np.random.default_rng(errors.seed)
        self._multipath: dict[tuple, tuple[GnssTime, float]] = {}

    def receiver_clock(self, t_r: GnssTime) -> float:
        elapsed = 0.0 if self.start is None else t_r - self.start
        return self.errors.receiver_clock + self.errors.receiver_clock_drift * elapsed

    def multipath(self, key: tuple, t_r: GnssTime) -> float:
        sigma = self.errors.multipath_sigma
        if sigma <= 0.0:
            return 0.0
        prev = self._multipath.get(key)
        if prev is None:
            value = sigma * self.rng.standard_normal()
        else:
            dt = max(0.0, t_r - prev[0])
            phi = math.exp(-dt / self.errors.multipath_tau)
            value = phi * prev[1] + sigma * math.sqrt(1.0 - phi * phi) * self.rng.standard_normal()
        self._multipath[key] = (t_r, value)
        return value

    def noise(self) -> float:
        sigma = self.errors.noise_sigma
        return sigma * self.rng.standard_normal() if sigma > 0.0 else 0.0


def synthesize_rover_measurement(
    model: RoverMeasurementModel, terms: SatelliteTerms, obs_type: str, t_r: GnssTime
) -> float:
    """Truth pseudorange: satellite terms at the rover plus receiver clock, hardware bias,
    multipath and noise."""
    e = model.errors
    rho = terms.pseudorange(obs_type)
    rho += (e.tropo_scale - 1.0) * terms.tropo + (e.iono_scale - 1.0) * terms.iono(obs_type)
    rho += C_LIGHT * (model.receiver_clock(t_r) + e.system_bias.get(terms.system, 0.0))
    rho += model.multipath((terms.system, terms.prn, obs_type), t_r)
    return rho + model.noise()


# Differential correction and positioning --------------------------------------


@dataclass(frozen=True)
class BaseGeometry:
    """What the rover recomputes for the virtual base: Sagnac range and c * satellite clock."""

    range: float
    clock_m: float


def base_geometry(base, t: GnssTime, store: CorrectionStore, system: str, prn: int,
                  validity: float) -> tuple[BaseGeometry, object]:
    prod = store.products(system, prn)
    solve = solve_ephemeris(base, t, prod.eph, prod.clk, validity)
    geo = BaseGeometry(sagnac_range(base, solve.state.position), C_LIGHT * solve.state.clock_offset)
    return geo, prod


def differential_correct(rover_rho: float, base_rho: float, base: BaseGeometry) -> float:
    """Remove the base's common-mode error from a rover pseudorange."""
    delta = base_rho - (base.range - base.clock_m)
    return rover_rho - delta


@dataclass(frozen=True)
class CorrectedMeasurement:
    system: str
    prn: int
    obs_type: str
    value: float
    satellite: np.ndarray
    sat_clock_m: float


@dataclass(frozen=True)
class SppSolution:
    position: np.ndarray
    clocks: Mapping[str, float]
    iterations: int
    residuals: np.ndarray
    gdop: float
    pdop: float
    hdop: float
    vdop: float


def design_row(position, satellite, column: int, ncols: int) -> np.ndarray:
    """Jacobian row of the Sagnac range plus one receiver clock (metres) column."""
    x, y, _ = satellite
    diff = np.asarray(position, dtype=float) - np.asarray(satellite, dtype=float)
    row = np.zeros(ncols)
    row[:3] = diff / np.linalg.norm(diff) + _OMEGA_OVER_C * np.array([-y, x, 0.0])
    row[column] = 1.0
    return row


def spp_solve(
    measurements: Sequence[CorrectedMeasurement],
    initial,
    max_iter: int = 20,
    tol: float = 1e-4,
) -> SppSolution:
    """Gauss-Newton fix with one receiver clock state per constellation."""
    systems = [s for s in SYSTEMS if any(m.system == s for m in measurements)]
    ncols = 3 + len(systems)
    if len(measurements) < ncols:
        raise DegenerateGeometryError(f"{len(measurements)} measurements for {ncols} unknowns")
    col = {s: 3 + k for k, s in enumerate(systems)}
    x = np.zeros(ncols)
    x[:3] = np.asarray(initial, dtype=float)
    y = np.array([m.value + m.sat_clock_m for m in measurements])
    for iteration in range(1, max_iter + 1):
        h = np.array([design_row(x[:3], m.satellite, col[m.system], ncols) for m in measurements])
        model = np.array([sagnac_range(x[:3], m.satellite) + x[col[m.system]] for m in measurements])
        if np.linalg.matrix_rank(h) < ncols:
            raise DegenerateGeometryError("rank-deficient geometry")
        step, *_ = np.linalg.lstsq(h, y - model, rcond=None)
        x += step
        if np.linalg.norm(step[:3]) < tol:
            break
    else:
        raise DegenerateGeometryError(f"least squares did not converge in {max_iter} iterations")
    h = np.array([design_row(x[:3], m.satellite, col[m.system], ncols) for m in measurements])
    residuals = y - np.array([sagnac_range(x[:3], m.satellite) + x[col[m.system]] for m in measurements])
    cov = np.linalg.inv(h.T @ h)
    g = ecef_to_geodetic(x[:3])
    rot = ned_rotation(g.lat, g.lon)
    ned = rot @ cov[:3, :3] @ rot.T
    return SppSolution(
        position=x[:3].copy(),
        clocks={s: float(x[col[s]]) for s in systems},
        iterations=iteration,
        residuals=residuals,
        gdop=float(math.sqrt(np.trace(cov))),
        pdop=float(math.sqrt(np.trace(cov[:3, :3]))),
        hdop=float(math.sqrt(ned[0, 0] + ned[1, 1])),
        vdop=float(math.sqrt(ned[2, 2])),
    )


# Metrics -----------------------------------------------------------------------


@dataclass(frozen=True)
class EpochResult:
    time: GnssTime
    estimate: np.ndarray
    truth: np.ndarray
    base: np.ndarray
    ned: tuple[float, float, float]
    n_meas: int
    max_residual: float
    solution: SppSolution

    @property
    def he(self) -> float:
        return math.hypot(self.ned[0], self.ned[1])

    @property
    def ve(self) -> float:
        return abs(self.ned[2])

    @property
    def err3d(self) -> float:
        return math.sqrt(sum(v * v for v in self.ned))


@dataclass(frozen=True)
class FixReport:
    epochs: int
    pr_he_1m: float
    pr_ve_3m: float
    pr_3d_3m: float
    pr_he_1_5m: float
    he_max: float
    ve_max: float
    err3d_max: float
    residual_max: float


def _fraction(values: np.ndarray, limit: float) -> float:
    return float(np.mean(values <= limit)) if values.size else float("nan")


def metrics(results: Iterable[EpochResult]) -> FixReport:
    results = list(results)
    he = np.array([r.he for r in results])
    ve = np.array([r.ve for r in results])
    e3 = np.array([r.err3d for r in results])
    res = np.array([r.max_residual for r in results])
    peak = (lambda a: float(a.max()) if a.size else float("nan"))
    return FixReport(
        epochs=len(results),
        pr_he_1m=_fraction(he, 1.0),
        pr_ve_3m=_fraction(ve, 3.0),
        pr_3d_3m=_fraction(e3, 3.0),
        pr_he_1_5m=_fraction(he, 1.5),
        he_max=peak(he),
        ve_max=peak(ve),
        err3d_max=peak(e3),
        residual_max=peak(res),
    )


def empirical_cdf(values: Sequence[float], thresholds: Sequence[float]) -> list[float]:
    """Fraction of values at or below each threshold."""
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        return [float("nan")] * len(thresholds)
    return [float(np.searchsorted(ordered, t, side="right")) / ordered.size for t in thresholds]


CDF_THRESHOLDS = (0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0)


def cdf_table(results: Sequence[EpochResult], thresholds: Sequence[float] = CDF_THRESHOLDS) -> str:
    he = empirical_cdf([r.he for r in results], thresholds)
    ve = empirical_cdf([r.ve for r in results], thresholds)
    e3 = empirical_cdf([r.err3d for r in results], thresholds)
    lines = ["threshold_m,pr_he,pr_ve,pr_3d"]
    lines += [f"{t:g},{a:.4f},{b:.4f},{c:.4f}" for t, a, b, c in zip(thresholds, he, ve, e3)]
    return "\n".join(lines) + "\n"


# Truth trajectories -------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Rover truth positions; linear interpolation in GPS time, constant outside the samples."""

    times: np.ndarray
    positions: np.ndarray
    week: int = 0
    base: Optional[np.ndarray] = None

    @classmethod
    def static(cls, position, base=None) -> "Trajectory":
        return cls(np.zeros(1), np.asarray(position, dtype=float).reshape(1, 3),
                   base=None if base is None else np.asarray(base, dtype=float))

    @classmethod
    def load(cls, path: Path) -> "Trajectory":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        base = np.asarray(raw["base"], dtype=float) if "base" in raw else None
        if "position" in raw:
            return cls.static(raw["position"], base)
        samples = np.asarray(raw["samples"], dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 4 or samples.shape[0] < 1:
            raise ValueError("'samples' must be a list of [tow, x, y, z]")
        order = np.argsort(samples[:, 0])
        return cls(samples[order, 0], samples[order, 1:], int(raw.get("week", 0)), base)

    def to_dict(self) -> dict:
        out: dict = {}
        if self.base is not None:
            out["base"] = self.base.tolist()
        if self.times.size == 1:
            out["position"] = self.positions[0].tolist()
        else:
            out["week"] = self.week
            out["samples"] = [[float(t), *p.tolist()] for t, p in zip(self.times, self.positions)]
        return out

    def at(self, t: GnssTime) -> np.ndarray:
        if self.times.size == 1:
            return self.positions[0].copy()
        s = (t.to_system("G") - GnssTime("G", self.week, 0.0))
        return np.array([np.interp(s, self.times, self.positions[:, k]) for k in range(3)])


# Rover processing ----------------------------------------------------------------


class LiveSnapshots:
    """Snapshot source for a live server: tails the same data directory it reads."""

    def __init__(self, data_dir: Path, clock=time.time) -> None:
        self.live = LiveStore()
        self.data_dir = Path(data_dir)
        self.start = gps_time_from_unix(clock())
        self.live.poll_directory(self.data_dir)

    def snapshot_at(self, t: GnssTime) -> CorrectionStore:
        self.live.poll_directory(self.data_dir)
        return self.live.current


class RoverProcessor:
    """Turns decoded virtual-base epochs into differential fixes.

    ``timeline`` is anything with a ``start`` time and ``snapshot_at(t)``: a
    :class:`ReplayTimeline` or :class:`LiveSnapshots`.
    """

    def __init__(
        self,
        timeline: ReplayTimeline | LiveSnapshots,
        trajectory: Trajectory,
        errors: ErrorModel = ErrorModel(),
        cfg: GeneratorConfig = GeneratorConfig(),
    ) -> None:
        self.timeline = timeline
        self.trajectory = trajectory
        self.errors = errors
        self.cfg = cfg
        self.truth_cfg = errors.truth_config(cfg)
        self.model = RoverMeasurementModel(errors, timeline.start)
        self.base: Optional[np.ndarray] = None
        self.estimate: Optional[np.ndarray] = None
        self.results: list[EpochResult] = []
        self.residuals: list[float] = []

    def epoch_time(self, msm) -> GnssTime:
        ref = self.timeline.start
        week = ref.to_system(msm.system).week
        t = GnssTime.normalized(msm.system, week, msm.epoch_ms / 1000.0).to_system("G")
        if t - ref < -302400.0:
            t = t + 604800.0
        return t

    def process_epoch(self, t: GnssTime, base_obs: Sequence) -> Optional[EpochResult]:
        if self.base is None:
            raise VrsError("observation received before the station message")
        store = self.timeline.snapshot_at(t)
        truth = self.trajectory.at(t)
        rows = []
        residuals = []
        for obs in base_obs:
            if obs.pseudorange is None:
                continue
            try:
                geo, prod = base_geometry(self.base, t, store, obs.system, obs.prn, self.cfg.ephemeris_max_age)
                terms = satellite_terms(truth, t, store, obs.system, obs.prn, (obs.obs_type,),
                                        replace(self.truth_cfg, elevation_mask=0.0))
            except VrsError as exc:
                log.debug("rover skips %s%02d: %s", obs.system, obs.prn, exc)
                continue
            if obs.obs_type not in terms.biases:
                continue
            rho_r = synthesize_rover_measurement(self.model, terms, obs.obs_type, t)
            value = differential_correct(rho_r, obs.pseudorange, geo)
            rover_clock = C_LIGHT * (self.model.receiver_clock(t) + self.errors.system_bias.get(obs.system, 0.0))
            residuals.append(value - (terms.geometric_range - terms.broadcast_clock_m) - rover_clock)
            rows.append((obs, value, prod))
        if not rows:
            return None
        position = self.estimate if self.estimate is not None else self.base
        try:
            # Satellite states depend weakly on the receiver position through the
            # transmit time, so solve once more at the first fix.
            for _ in range(2):
                meas = self._measurements(rows, position, t)
                sol = spp_solve(meas, position)
                position = sol.position
        except (DegenerateGeometryError, VrsError) as exc:
            log.warning("no fix at %s: %s", t, exc)
            return None
        self.estimate = sol.position
        self.residuals.extend(residuals)
        result = EpochResult(t, sol.position, truth, self.base.copy(), ned_error(truth, sol.position),
                             len(meas), float(np.max(np.abs(residuals))), sol)
        self.results.append(result)
        return result

    def _measurements(self, rows, position, t: GnssTime) -> list[CorrectedMeasurement]:
        out = []
        for obs, value, prod in rows:
            solve = solve_ephemeris(position, t, prod.eph, prod.clk, self.cfg.ephemeris_max_age)
            out.append(CorrectedMeasurement(obs.system, obs.prn, obs.obs_type, value,
                                            solve.state.position, C_LIGHT * solve.state.clock_offset))
        return out


@dataclass
class RoverRun:
    results: list[EpochResult]
    residuals: list[float]
    epochs_received: int
    station_messages: int
    stream: bytes = b""


def run_rover(
    host: str,
    port: int,
    processor: RoverProcessor,
    systems: Sequence[str] = SYSTEMS,
    obs_types: Sequence[str] = ("C1C", "C2I"),
    base=None,
    update_distance: Optional[float] = None,
    timeout: float = 60.0,
    keep_stream: bool = False,
) -> RoverRun:
    """Connect, request a virtual base, and process the stream until the server closes it."""
    traj = processor.trajectory
    start = processor.timeline.start
    if base is None:
        base = traj.base if traj.base is not None else traj.at(start)
    requested = np.asarray(base, dtype=float)
    frames = FrameReader()
    pending: list = []
    epochs = 0
    stations = 0
    stream = bytearray()
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.sendall(format_request(requested, systems, obs_types).encode("ascii"))
        status = _read_line(sock)
        if not status.startswith("OK"):
            raise VrsError(f"server refused request: {status.strip()}")
        while True:
            data = sock.recv(65536)
            if not data:
                break
            if keep_stream:
                stream += data
            for payload in frames.feed(data):
                number = message_number(payload)
                if number == STATION_MESSAGE:
                    processor.base = decode_station(payload)
                    stations += 1
                    continue
                msm = decode_msm4(payload)
                pending.append(msm)
                if msm.multiple:
                    continue
                t = processor.epoch_time(pending[0])
                obs = [o for m in pending for o in m.observations]
                pending = []
                epochs += 1
                processor.process_epoch(t, obs)
                if update_distance is not None:
                    here = traj.at(t + 1.0)
                    if np.linalg.norm(here - requested) > update_distance:
                        requested = here
                        sock.sendall(format_request(requested, systems, obs_types).encode("ascii"))
    return RoverRun(processor.results, processor.residuals, epochs, stations, bytes(stream))


def _read_line(sock: socket.socket) -> str:
    buf = bytearray()
    while not buf.endswith(b"\n"):
        chunk = sock.recv(1)
        if not chunk:
            break
        buf += chunk
    return buf.decode("ascii", "replace")


CSV_HEADER = (
    "week,tow,n_meas,est_x,est_y,est_z,truth_x,truth_y,truth_z,north,east,down,"
    "he,ve,err3d,gdop,pdop,hdop,vdop,max_abs_residual\n"
)


def write_csv(path: Path, results: Sequence[EpochResult]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER)
        for r in results:
            s = r.solution
            fields = [r.time.week, f"{r.time.tow:.3f}", r.n_meas,
                      *(f"{v:.4f}" for v in r.estimate), *(f"{v:.4f}" for v in r.truth),
                      *(f"{v:.4f}" for v in r.ned), f"{r.he:.4f}", f"{r.ve:.4f}", f"{r.err3d:.4f}",
                      f"{s.gdop:.3f}", f"{s.pdop:.3f}", f"{s.hdop:.3f}", f"{s.vdop:.3f}",
                      f"{r.max_residual:.5f}"]
            fh.write(",".join(str(v) for v in fields) + "\n")
