"""Client request line: ``VNDGNSS/1 POS ECEF <x> <y> <z> SYS <G|E|C>[,..] SIG <type>[,..]``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import SYSTEMS
from .errors import RequestError
from .rtcm.msm import SIGNAL_CODES

MAGIC = "VNDGNSS/1"
_AXIS_LIMIT = (2**37 - 1) * 1e-4


@dataclass(frozen=True)
class ClientRequest:
    position: np.ndarray
    systems: tuple[str, ...]
    signals: dict

    def to_line(self) -> str:
        return format_request(self.position, self.systems, sorted({s for v in self.signals.values() for s in v}))


def format_request(position, systems, obs_types) -> str:
    x, y, z = (float(v) for v in np.asarray(position, dtype=float).reshape(3))
    return f"{MAGIC} POS ECEF {x:.4f} {y:.4f} {z:.4f} SYS {','.join(systems)} SIG {','.join(obs_types)}\n"


def parse_request(line: str | bytes) -> ClientRequest:
    if isinstance(line, bytes):
        try:
            line = line.decode("ascii")
        except UnicodeDecodeError:
            raise RequestError("request is not ASCII") from None
    tokens = line.strip().split()
    if len(tokens) != 10:
        raise RequestError("expected: VNDGNSS/1 POS ECEF <x> <y> <z> SYS <list> SIG <list>")
    if tokens[0] != MAGIC:
        raise RequestError(f"unsupported protocol {tokens[0]!r}")
    if tokens[1:3] != ["POS", "ECEF"] or tokens[6] != "SYS" or tokens[8] != "SIG":
        raise RequestError("malformed request keywords")
    try:
        pos = np.array([float(v) for v in tokens[3:6]])
    except ValueError:
        raise RequestError("position components must be numbers") from None
    if not np.all(np.isfinite(pos)):
        raise RequestError("position must be finite")
    norm = float(np.linalg.norm(pos))
    if not 6.0e6 <= norm <= 5.0e7 or np.any(np.abs(pos) > _AXIS_LIMIT):
        raise RequestError("position is not in the Earth's vicinity")

    systems = []
    for sys in tokens[7].split(","):
        if sys not in SYSTEMS:
            raise RequestError(f"unknown constellation {sys!r}")
        if sys not in systems:
            systems.append(sys)
    obs_types = []
    for obs in tokens[9].split(","):
        if len(obs) != 3 or obs[0] != "C":
            raise RequestError(f"unsupported observation type {obs!r}")
        if obs not in obs_types:
            obs_types.append(obs)
    signals = {}
    for sys in systems:
        usable = tuple(obs for obs in obs_types if obs[1:] in SIGNAL_CODES[sys])
        if not usable:
            raise RequestError(f"no supported observation type requested for {sys}")
        signals[sys] = usable
    ordered = tuple(s for s in SYSTEMS if s in systems)
    return ClientRequest(pos, ordered, signals)


__all__ = ["ClientRequest", "MAGIC", "format_request", "parse_request"]
