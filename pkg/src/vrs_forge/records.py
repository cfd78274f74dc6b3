"""Line-delimited JSON correction records: parsing, serialization and file loading."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .constants import BEIDOU, GPS, SYSTEM_PARAMS, SYSTEMS
from .ephemeris import BroadcastEphemeris, ClockModel, beidou_iod
from .ionosphere import VtecGrid, VtecShModel
from .ssr import ClockCorrection, CodeBias, OrbitCorrection
from .timesys import GnssTime
from .troposphere import IggTropGrid

log = logging.getLogger(__name__)

RECORD_TYPES = ("eph", "orb", "clk", "bias", "vtec_sh", "vtec_grid", "tropo_grid")
_EPH_FIELDS = (
    "sqrt_a", "e", "i0", "omega0", "omega", "m0", "delta_n", "idot", "omegadot",
    "cuc", "cus", "cic", "cis", "crc", "crs",
)


class RecordError(ValueError):
    """A record does not match its schema."""


@dataclass(frozen=True)
class TimedRecord:
    """A parsed record and the GPS time from which it may be used (None = from the start)."""

    avail: Optional[GnssTime]
    item: object
    kind: str


def _num(rec: dict, name: str, default: Optional[float] = None) -> float:
    value = rec.get(name, default)
    if value is None:
        raise RecordError(f"missing field {name!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecordError(f"field {name!r} must be numeric")
    value = float(value)
    if not math.isfinite(value):
        raise RecordError(f"field {name!r} must be finite")
    return value


def _int(rec: dict, name: str, default: Optional[int] = None) -> int:
    value = rec.get(name, default)
    if value is None:
        raise RecordError(f"missing field {name!r}")
    if isinstance(value, bool) or not isinstance(value, int):
        raise RecordError(f"field {name!r} must be an integer")
    return value


def _system(rec: dict) -> str:
    sys = rec.get("sys")
    if sys not in SYSTEMS:
        raise RecordError(f"unknown constellation {sys!r}")
    return sys


def _prn(rec: dict, system: str) -> int:
    prn = _int(rec, "prn")
    if not 1 <= prn <= SYSTEM_PARAMS[system].max_prn:
        raise RecordError(f"PRN {prn} out of range for {system}")
    return prn


def _time(rec: dict, system: str, week_key: str = "week", tow_key: str = "tow") -> GnssTime:
    return GnssTime.normalized(system, _int(rec, week_key), _num(rec, tow_key))


def _grid_axis(rec: dict, name: str) -> np.ndarray:
    values = rec.get(name)
    if not isinstance(values, list) or len(values) < 2:
        raise RecordError(f"field {name!r} must be a list of at least two numbers")
    return np.asarray(values, dtype=float)


def parse_record(rec: dict):
    """Turn one decoded JSON object into its domain value.

    Times are in the satellite's own time scale for satellite records and
    GPS time for ionosphere records.  BeiDou ephemeris IODs are derived from toe.
    """
    kind = rec.get("type")
    try:
        if kind == "eph":
            sys = _system(rec)
            toe = _time(rec, sys, "week", "toe")
            toc = GnssTime.normalized(sys, _int(rec, "toc_week", toe.week), _num(rec, "toc", toe.tow))
            iod = beidou_iod(int(toe.tow)) if sys == BEIDOU else _int(rec, "iod")
            eph = BroadcastEphemeris(
                system=sys,
                prn=_prn(rec, sys),
                iod=iod,
                toe=toe,
                healthy=bool(rec.get("healthy", True)),
                **{name: _num(rec, name, 0.0 if name not in ("sqrt_a", "e") else None) for name in _EPH_FIELDS},
            )
            clk = ClockModel(_num(rec, "a0"), _num(rec, "a1", 0.0), _num(rec, "a2", 0.0), toc)
            return eph, clk
        if kind == "orb":
            sys = _system(rec)
            return OrbitCorrection(
                system=sys,
                prn=_prn(rec, sys),
                iod=_int(rec, "iod"),
                t_o=_time(rec, sys),
                delta_o=[_num(rec, "dr"), _num(rec, "da"), _num(rec, "dc")],
                delta_o_dot=[_num(rec, "dr_dot", 0.0), _num(rec, "da_dot", 0.0), _num(rec, "dc_dot", 0.0)],
            )
        if kind == "clk":
            sys = _system(rec)
            return ClockCorrection(
                system=sys,
                prn=_prn(rec, sys),
                iod=_int(rec, "iod"),
                t_c=_time(rec, sys),
                c0=_num(rec, "c0"),
                c1=_num(rec, "c1", 0.0),
                c2=_num(rec, "c2", 0.0),
            )
        if kind == "bias":
            sys = _system(rec)
            obs = rec.get("obs")
            if not isinstance(obs, str) or len(obs) != 3:
                raise RecordError("field 'obs' must be a three-character observation type")
            when = _time(rec, sys) if "week" in rec else None
            return CodeBias(sys, _prn(rec, sys), obs, _num(rec, "bias"), when)
        if kind == "vtec_sh":
            degree = _int(rec, "degree")
            order = _int(rec, "order")
            height = _num(rec, "height") if "height" in rec else None
            return VtecShModel(degree, order, np.asarray(rec.get("c"), dtype=float),
                               np.asarray(rec.get("s"), dtype=float), _time(rec, GPS), height)
        if kind == "vtec_grid":
            return VtecGrid(_grid_axis(rec, "lats"), _grid_axis(rec, "lons"),
                            np.asarray(rec.get("values"), dtype=float), _time(rec, GPS))
        if kind == "tropo_grid":
            return _parse_tropo(rec)
    except RecordError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise RecordError(f"{kind}: {exc}") from exc
    raise RecordError(f"unknown record type {kind!r}")


def _parse_tropo(rec: dict) -> IggTropGrid:
    lats = _grid_axis(rec, "lats")
    lons = _grid_axis(rec, "lons")
    nodes = rec.get("nodes")
    if not isinstance(nodes, list) or len(nodes) != lats.size * lons.size:
        raise RecordError("'nodes' must list len(lats) * len(lons) entries, latitude-major")
    max_degree = max(len(node["alpha"]) - 1 for node in nodes)
    shape = (lats.size, lons.size)
    degree = np.zeros(shape, dtype=int)
    alpha = np.zeros(shape + (max_degree + 1,))
    beta = np.zeros(shape + (4, 6))
    c_poly = np.zeros(shape)
    for k, node in enumerate(nodes):
        i, j = divmod(k, lons.size)
        coeffs = np.asarray(node["alpha"], dtype=float)
        degree[i, j] = coeffs.size - 1
        alpha[i, j, : coeffs.size] = coeffs
        beta[i, j] = np.asarray(node["beta"], dtype=float)
        c_poly[i, j] = float(node.get("c", 0.0))
    return IggTropGrid(lats, lons, degree, alpha, beta, c_poly, rec.get("height_unit", "km"))


def _avail(rec: dict) -> Optional[GnssTime]:
    avail = rec.get("avail")
    if avail is None:
        return None
    if not isinstance(avail, dict):
        raise RecordError("'avail' must be an object with week and tow")
    return _time(avail, GPS)


def iter_records(lines: Iterable[str], source: str = "<stream>") -> Iterator[TimedRecord]:
    """Parse records, skipping (and logging) malformed lines."""
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise RecordError("record must be a JSON object")
            yield TimedRecord(_avail(rec), parse_record(rec), rec["type"])
        except (json.JSONDecodeError, RecordError, ValueError) as exc:
            log.warning("skipping malformed record source=%s line=%d reason=%s", source, lineno, exc)


def load_directory(path: Path) -> list[TimedRecord]:
    """Read every ``*.jsonl`` file in ``path`` (sorted by name)."""
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"data directory not found: {path}")
    records: list[TimedRecord] = []
    for file in sorted(path.glob("*.jsonl")):
        with file.open("r", encoding="utf-8") as fh:
            records.extend(iter_records(fh, str(file)))
    return records


# Serialization -----------------------------------------------------------------


def _with_avail(rec: dict, avail: Optional[GnssTime]) -> dict:
    if avail is not None:
        rec["avail"] = {"week": avail.week, "tow": avail.tow}
    return rec


def eph_record(eph: BroadcastEphemeris, clk: ClockModel, avail: Optional[GnssTime] = None) -> dict:
    rec = {"type": "eph", "sys": eph.system, "prn": eph.prn, "iod": eph.iod,
           "week": eph.toe.week, "toe": eph.toe.tow, "toc_week": clk.toc.week, "toc": clk.toc.tow}
    rec.update({name: float(getattr(eph, name)) for name in _EPH_FIELDS})
    rec.update({"a0": clk.a0, "a1": clk.a1, "a2": clk.a2, "healthy": eph.healthy})
    return _with_avail(rec, avail)


def orbit_record(corr: OrbitCorrection, avail: Optional[GnssTime] = None) -> dict:
    dr, da, dc = (float(v) for v in corr.delta_o)
    vr, va, vc = (float(v) for v in corr.delta_o_dot)
    rec = {"type": "orb", "sys": corr.system, "prn": corr.prn, "iod": corr.iod,
           "week": corr.t_o.week, "tow": corr.t_o.tow,
           "dr": dr, "da": da, "dc": dc, "dr_dot": vr, "da_dot": va, "dc_dot": vc}
    return _with_avail(rec, avail)


def clock_record(corr: ClockCorrection, avail: Optional[GnssTime] = None) -> dict:
    rec = {"type": "clk", "sys": corr.system, "prn": corr.prn, "iod": corr.iod,
           "week": corr.t_c.week, "tow": corr.t_c.tow, "c0": corr.c0, "c1": corr.c1, "c2": corr.c2}
    return _with_avail(rec, avail)


def bias_record(bias: CodeBias, avail: Optional[GnssTime] = None) -> dict:
    rec = {"type": "bias", "sys": bias.system, "prn": bias.prn, "obs": bias.obs_type, "bias": bias.bias}
    if bias.time is not None:
        rec.update({"week": bias.time.week, "tow": bias.time.tow})
    return _with_avail(rec, avail)


def vtec_sh_record(model: VtecShModel, avail: Optional[GnssTime] = None) -> dict:
    rec = {"type": "vtec_sh", "week": model.epoch.week, "tow": model.epoch.tow,
           "degree": model.degree, "order": model.order,
           "c": model.c.tolist(), "s": model.s.tolist()}
    if model.height is not None:
        rec["height"] = model.height
    return _with_avail(rec, avail)


def vtec_grid_record(grid: VtecGrid, avail: Optional[GnssTime] = None) -> dict:
    rec = {"type": "vtec_grid", "week": grid.time.week, "tow": grid.time.tow,
           "lats": grid.lats.tolist(), "lons": grid.lons.tolist(), "values": grid.values.tolist()}
    return _with_avail(rec, avail)


def tropo_grid_record(grid: IggTropGrid) -> dict:
    nodes = []
    for i in range(grid.lats.size):
        for j in range(grid.lons.size):
            m = int(grid.degree[i, j])
            nodes.append({"alpha": grid.alpha[i, j, : m + 1].tolist(),
                          "beta": grid.beta[i, j].tolist(), "c": float(grid.c_poly[i, j])})
    return {"type": "tropo_grid", "height_unit": grid.height_unit,
            "lats": grid.lats.tolist(), "lons": grid.lons.tolist(), "nodes": nodes}


def write_records(path: Path, records: Iterable[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
