"""MSM4 observation messages (1074 GPS, 1094 Galileo, 1124 BeiDou)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from ..constants import BEIDOU, C_LIGHT, GALILEO, GPS
from ..errors import DecodeError, EncodeError
from ..timesys import GnssTime
from .bits import BitReader, BitWriter

MSM_MESSAGES = {GPS: 1074, GALILEO: 1094, BEIDOU: 1124}
MSM_SYSTEMS = {v: k for k, v in MSM_MESSAGES.items()}

# MSM signal id -> two-character signal code.
SIGNAL_IDS = {
    GPS: {2: "1C", 3: "1P", 4: "1W", 8: "2C", 9: "2P", 10: "2W", 15: "2S", 16: "2L", 17: "2X",
          22: "5I", 23: "5Q", 24: "5X"},
    GALILEO: {2: "1C", 3: "1A", 4: "1B", 5: "1X", 6: "1Z", 8: "6C", 9: "6A", 10: "6B", 11: "6X",
              12: "6Z", 14: "7I", 15: "7Q", 16: "7X", 18: "8I", 19: "8Q", 20: "8X", 22: "5I",
              23: "5Q", 24: "5X"},
    BEIDOU: {2: "2I", 3: "2Q", 4: "2X", 8: "6I", 9: "6Q", 10: "6X", 14: "7I", 15: "7Q", 16: "7X"},
}
SIGNAL_CODES = {sys: {code: sid for sid, code in table.items()} for sys, table in SIGNAL_IDS.items()}

MS_TO_M = C_LIGHT * 1e-3
ROUGH_RES = 1.0 / 1024.0
FINE_RES = 2.0**-24
FINE_MAX = 2**14 - 1
FINE_INVALID = -(2**14)
PHASE_INVALID = -(2**21)
ROUGH_INVALID = 255


def lock_indicator(lock_ms: float) -> int:
    """4-bit indicator i with lock time >= 2**(i + 4) ms (0 below 32 ms)."""
    if lock_ms < 32.0:
        return 0
    return min(15, int(math.floor(math.log2(lock_ms))) - 4)


def lock_time_minimum(indicator: int) -> float:
    return 0.0 if indicator == 0 else float(2 ** (indicator + 4))


@dataclass(frozen=True)
class DecodedObservation:
    system: str
    prn: int
    obs_type: str
    pseudorange: Optional[float]
    cnr: int
    lock_indicator: int
    half_cycle: int = 0


@dataclass(frozen=True)
class DecodedMsm:
    message: int
    system: str
    station_id: int
    epoch_ms: int
    multiple: bool
    iods: int
    observations: tuple[DecodedObservation, ...]

    def epoch_time(self, week: int) -> GnssTime:
        return GnssTime(self.system, week, self.epoch_ms / 1000.0)


def epoch_ms(t: GnssTime, system: str) -> int:
    """Epoch field value: time of week in ms in the constellation's own time scale."""
    local = t.to_system(system)
    return int(round(local.tow * 1000.0)) % 604_800_000


def encode_msm4(
    obs: Sequence,
    t_b: GnssTime,
    station_id: int,
    system: str,
    multiple: bool = False,
    iods: int = 0,
) -> bytes:
    """Pack observations of one constellation into an MSM4 payload."""
    if system not in MSM_MESSAGES:
        raise EncodeError(f"no MSM message for constellation {system!r}")
    cells: dict[tuple[int, int], object] = {}
    for o in obs:
        if o.system != system:
            raise EncodeError(f"observation of {o.system} in {system} message")
        if not 1 <= o.prn <= 64:
            raise EncodeError(f"satellite id {o.prn} out of range")
        code = o.obs_type[1:]
        sid = SIGNAL_CODES[system].get(code)
        if sid is None or o.obs_type[0] != "C":
            raise EncodeError(f"unsupported observation type {o.obs_type} for {system}")
        if (o.prn, sid) in cells:
            raise EncodeError(f"duplicate cell {system}{o.prn:02d} {o.obs_type}")
        cells[(o.prn, sid)] = o
    sats = sorted({prn for prn, _ in cells})
    sigs = sorted({sid for _, sid in cells})
    if len(sats) * len(sigs) > 64:
        raise EncodeError("satellite x signal count exceeds 64 cells")

    w = BitWriter()
    w.unsigned(MSM_MESSAGES[system], 12).unsigned(station_id, 12)
    w.unsigned(epoch_ms(t_b, system), 30).unsigned(int(multiple), 1).unsigned(iods, 3)
    w.unsigned(0, 7)  # reserved
    w.unsigned(0, 2)  # clock steering
    w.unsigned(0, 2)  # external clock
    w.unsigned(0, 1)  # smoothing type
    w.unsigned(0, 3)  # smoothing interval
    w.unsigned(sum(1 << (64 - prn) for prn in sats), 64)
    w.unsigned(sum(1 << (32 - sid) for sid in sigs), 32)
    for prn in sats:
        for sid in sigs:
            w.unsigned(int((prn, sid) in cells), 1)

    rough = {}
    for prn in sats:
        first = next(cells[(prn, sid)] for sid in sigs if (prn, sid) in cells)
        units = int(round(first.pseudorange / MS_TO_M / ROUGH_RES))
        if not 0 <= units >> 10 < ROUGH_INVALID:
            raise EncodeError(f"pseudorange {first.pseudorange:.1f} m not representable")
        rough[prn] = units
    for prn in sats:
        w.unsigned(rough[prn] >> 10, 8)
    for prn in sats:
        w.unsigned(rough[prn] & 0x3FF, 10)

    ordered = [cells[(prn, sid)] for prn in sats for sid in sigs if (prn, sid) in cells]
    for o in ordered:
        fine = int(round((o.pseudorange / MS_TO_M - rough[o.prn] * ROUGH_RES) / FINE_RES))
        if not -FINE_MAX <= fine <= FINE_MAX:
            raise EncodeError(f"{system}{o.prn:02d} {o.obs_type}: fine range {fine} out of bounds")
        w.signed(fine, 15)
    for _ in ordered:
        w.signed(PHASE_INVALID, 22)
    for o in ordered:
        w.unsigned(lock_indicator(o.lock_time * 1000.0), 4)
    for _ in ordered:
        w.unsigned(0, 1)
    for o in ordered:
        if not 0 <= o.snr <= 63:
            raise EncodeError(f"CNR {o.snr} does not fit in 6 bits")
        w.unsigned(int(o.snr), 6)
    return w.to_bytes()


def _popcount(value: int) -> int:
    return bin(value).count("1")


def decode_msm4(payload: bytes) -> DecodedMsm:
    r = BitReader(payload)
    message = r.unsigned(12)
    system = MSM_SYSTEMS.get(message)
    if system is None:
        raise DecodeError(f"message {message} is not an MSM4 observation message")
    station_id = r.unsigned(12)
    epoch = r.unsigned(30)
    multiple = bool(r.unsigned(1))
    iods = r.unsigned(3)
    r.unsigned(7)
    r.unsigned(2)
    r.unsigned(2)
    r.unsigned(1)
    r.unsigned(3)
    sat_mask = r.unsigned(64)
    sig_mask = r.unsigned(32)
    sats = [k + 1 for k in range(64) if sat_mask >> (63 - k) & 1]
    sigs = [k + 1 for k in range(32) if sig_mask >> (31 - k) & 1]
    if len(sats) * len(sigs) > 64:
        raise DecodeError("satellite x signal count exceeds 64 cells")
    cell_bits = r.unsigned(len(sats) * len(sigs)) if sats and sigs else 0
    if (not sats) != (not sigs):
        raise DecodeError("satellite and signal masks disagree about emptiness")
    layout = []
    nbits = len(sats) * len(sigs)
    for a, prn in enumerate(sats):
        row = [sid for b, sid in enumerate(sigs) if cell_bits >> (nbits - 1 - (a * len(sigs) + b)) & 1]
        if not row:
            raise DecodeError(f"satellite {prn} has no cells")
        layout.extend((prn, sid) for sid in row)
    used_sigs = {sid for _, sid in layout}
    if used_sigs != set(sigs):
        raise DecodeError("signal mask lists signals without cells")
    for sid in sigs:
        if sid not in SIGNAL_IDS[system]:
            raise DecodeError(f"unknown signal id {sid} for {system}")

    rough_ms = [r.unsigned(8) for _ in sats]
    rough_mod = [r.unsigned(10) for _ in sats]
    fine = [r.signed(15) for _ in layout]
    for _ in layout:
        r.signed(22)  # phase range is never populated
    lock = [r.unsigned(4) for _ in layout]
    half = [r.unsigned(1) for _ in layout]
    cnr = [r.unsigned(6) for _ in layout]
    if r.remaining >= 8:
        raise DecodeError(f"{r.remaining} unexpected trailing bits")

    rough_by_sat = {}
    for prn, ms, mod in zip(sats, rough_ms, rough_mod):
        rough_by_sat[prn] = None if ms == ROUGH_INVALID else ms + mod * ROUGH_RES
    observations = []
    for (prn, sid), f, lk, hc, cn in zip(layout, fine, lock, half, cnr):
        base = rough_by_sat[prn]
        rng = None if base is None or f == FINE_INVALID else (base + f * FINE_RES) * MS_TO_M
        observations.append(
            DecodedObservation(system, prn, "C" + SIGNAL_IDS[system][sid], rng, cn, lk, hc)
        )
    return DecodedMsm(message, system, station_id, epoch, multiple, iods, tuple(observations))
