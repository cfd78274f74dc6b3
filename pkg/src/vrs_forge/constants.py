"""Physical constants, constellation parameters and signal tables."""

from __future__ import annotations

import math
from dataclasses import dataclass

C_LIGHT = 299792458.0
OMEGA_IE = 7.2921151467e-5

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

TECU = 1.0e16
IONO_K = 40.3


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = C_LIGHT
    omega_ie: float = OMEGA_IE
    r_e: float = 6371000.0
    h_m: float = 350000.0

    def __post_init__(self) -> None:
        for name in ("c", "omega_ie", "r_e", "h_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and positive, got {value!r}")
        if self.c != C_LIGHT or self.omega_ie != OMEGA_IE:
            raise ValueError("c and omega_ie are fixed constants")


DEFAULT_CONSTANTS = PhysicalConstants()

GPS = "G"
GALILEO = "E"
BEIDOU = "C"
SYSTEMS = (GPS, GALILEO, BEIDOU)
SYSTEM_NAMES = {GPS: "GPS", GALILEO: "Galileo", BEIDOU: "BeiDou"}


@dataclass(frozen=True)
class SystemParameters:
    """Per-constellation ICD constants."""

    mu: float
    omega_e: float
    max_prn: int

    @property
    def f_rel(self) -> float:
        """Relativistic clock coefficient -2*sqrt(mu)/c^2 in s/sqrt(m)."""
        return -2.0 * math.sqrt(self.mu) / C_LIGHT**2


SYSTEM_PARAMS = {
    GPS: SystemParameters(mu=3.986005e14, omega_e=7.2921151467e-5, max_prn=32),
    GALILEO: SystemParameters(mu=3.986004418e14, omega_e=7.2921151467e-5, max_prn=36),
    BEIDOU: SystemParameters(mu=3.986004418e14, omega_e=7.2921150e-5, max_prn=63),
}

# BeiDou PRNs broadcasting GEO ephemerides.
BEIDOU_GEO_PRNS = frozenset([1, 2, 3, 4, 5, 59, 60, 61, 62, 63])

FREQ_L1 = 1575.42e6
FREQ_L2 = 1227.60e6
FREQ_L5 = 1176.45e6
FREQ_E5B = 1207.14e6
FREQ_E6 = 1278.75e6
FREQ_B1I = 1561.098e6
FREQ_B3I = 1268.52e6

# RINEX two-character signal code -> carrier frequency.
SIGNAL_FREQUENCIES = {
    GPS: {
        "1C": FREQ_L1, "1P": FREQ_L1, "1W": FREQ_L1,
        "2C": FREQ_L2, "2P": FREQ_L2, "2W": FREQ_L2, "2S": FREQ_L2, "2L": FREQ_L2, "2X": FREQ_L2,
        "5I": FREQ_L5, "5Q": FREQ_L5, "5X": FREQ_L5,
    },
    GALILEO: {
        "1C": FREQ_L1, "1A": FREQ_L1, "1B": FREQ_L1, "1X": FREQ_L1, "1Z": FREQ_L1,
        "6C": FREQ_E6, "6A": FREQ_E6, "6B": FREQ_E6, "6X": FREQ_E6, "6Z": FREQ_E6,
        "7I": FREQ_E5B, "7Q": FREQ_E5B, "7X": FREQ_E5B,
        "5I": FREQ_L5, "5Q": FREQ_L5, "5X": FREQ_L5,
    },
    BEIDOU: {
        "2I": FREQ_B1I, "2Q": FREQ_B1I, "2X": FREQ_B1I,
        "6I": FREQ_B3I, "6Q": FREQ_B3I, "6X": FREQ_B3I,
        "7I": FREQ_E5B, "7Q": FREQ_E5B, "7X": FREQ_E5B,
    },
}

DEFAULT_SIGNALS = {GPS: ("C1C",), GALILEO: ("C1C",), BEIDOU: ("C2I",)}


def signal_frequency(system: str, obs_type: str) -> float:
    """Carrier frequency in Hz of an observation type such as ``"C1C"``."""
    try:
        return SIGNAL_FREQUENCIES[system][obs_type[1:]]
    except KeyError:
        raise ValueError(f"unknown signal {obs_type!r} for system {system!r}") from None
