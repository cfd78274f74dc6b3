"""Server configuration file (JSON)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .constants import PhysicalConstants
from .generator import GeneratorConfig

_KNOWN_KEYS = {
    "station_id", "elevation_mask_deg", "snr_slope", "snr_floor", "staleness", "iono_source",
    "iono_mapping", "tropo", "clock_linear_c2", "signals", "request_timeout", "r_e", "h_m",
}
_STALENESS_KEYS = {
    "ephemeris": "ephemeris_max_age",
    "orbit": "orbit_max_age",
    "clock": "clock_max_age",
    "bias": "bias_max_age",
    "vtec": "vtec_max_age",
}


@dataclass(frozen=True)
class ServerConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    station_id: int = 0
    request_timeout: float = 10.0


def config_from_dict(raw: dict) -> ServerConfig:
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    gen: dict = {}
    if "elevation_mask_deg" in raw:
        gen["elevation_mask"] = math.radians(float(raw["elevation_mask_deg"]))
    for key in ("snr_slope", "iono_source", "iono_mapping"):
        if key in raw:
            gen[key] = raw[key]
    if "snr_floor" in raw:
        gen["snr_floor"] = int(raw["snr_floor"])
    for key in ("tropo", "clock_linear_c2"):
        if key in raw:
            gen[key] = bool(raw[key])
    for key, value in raw.get("staleness", {}).items():
        if key not in _STALENESS_KEYS:
            raise ValueError(f"unknown staleness window {key!r}")
        gen[_STALENESS_KEYS[key]] = float(value)
    if "signals" in raw:
        gen["signals"] = {sys: tuple(sigs) for sys, sigs in raw["signals"].items()}
    if "r_e" in raw or "h_m" in raw:
        defaults = PhysicalConstants()
        gen["constants"] = PhysicalConstants(
            r_e=float(raw.get("r_e", defaults.r_e)), h_m=float(raw.get("h_m", defaults.h_m))
        )
    return ServerConfig(
        generator=GeneratorConfig(**gen),
        station_id=int(raw.get("station_id", 0)),
        request_timeout=float(raw.get("request_timeout", 10.0)),
    )


def load_config(path: Optional[Path]) -> ServerConfig:
    if path is None:
        return ServerConfig()
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


