"""Reference station position message (1005 layout, flagged as a virtual station)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..constants import GALILEO, GPS
from ..errors import DecodeError, EncodeError
from .bits import BitReader, BitWriter

STATION_MESSAGE = 1005
COORD_RES = 1e-4
_COORD_LIMIT = 2**37 - 1


@dataclass(frozen=True)
class StationMessage:
    station_id: int
    position: np.ndarray
    gps: bool
    glonass: bool
    galileo: bool
    virtual: bool


def encode_station(p_b, station_id: int, systems: Iterable[str] = (GPS,)) -> bytes:
    pos = np.asarray(p_b, dtype=float).reshape(3)
    if not np.all(np.isfinite(pos)):
        raise EncodeError("station coordinates must be finite")
    norm = float(np.linalg.norm(pos))
    if not 6.0e6 <= norm <= 5.0e7:
        raise EncodeError(f"station position norm {norm:.1f} m outside Earth vicinity")
    units = [int(round(v / COORD_RES)) for v in pos]
    if any(abs(u) > _COORD_LIMIT for u in units):
        raise EncodeError("station coordinate exceeds the 38-bit field")
    systems = set(systems)
    w = BitWriter()
    w.unsigned(STATION_MESSAGE, 12).unsigned(station_id, 12).unsigned(0, 6)
    w.unsigned(int(GPS in systems), 1).unsigned(0, 1).unsigned(int(GALILEO in systems), 1)
    w.unsigned(1, 1)  # computed (non-physical) reference station
    w.signed(units[0], 38)
    w.unsigned(0, 1).unsigned(0, 1)
    w.signed(units[1], 38)
    w.unsigned(0, 2)
    w.signed(units[2], 38)
    return w.to_bytes()


def decode_station_message(payload: bytes) -> StationMessage:
    r = BitReader(payload)
    number = r.unsigned(12)
    if number != STATION_MESSAGE:
        raise DecodeError(f"message {number} is not a station message")
    station_id = r.unsigned(12)
    r.unsigned(6)
    gps, glo, gal, virtual = (bool(r.unsigned(1)) for _ in range(4))
    x = r.signed(38)
    r.unsigned(2)
    y = r.signed(38)
    r.unsigned(2)
    z = r.signed(38)
    if r.remaining >= 8:
        raise DecodeError("unexpected trailing bytes in station message")
    return StationMessage(station_id, np.array([x, y, z], dtype=float) * COORD_RES, gps, glo, gal, virtual)


def decode_station(payload: bytes) -> np.ndarray:
    return decode_station_message(payload).position
