"""Earth-fixed geometry: ranges, WGS-84 conversions, look angles, NED errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .constants import C_LIGHT, OMEGA_IE, WGS84_A, WGS84_B, WGS84_E2
from .errors import DegenerateGeometryError

_OMEGA_OVER_C = OMEGA_IE / C_LIGHT
_EP2 = (WGS84_A**2 - WGS84_B**2) / WGS84_B**2

EcefPosition = np.ndarray


def as_ecef(p, *, check_norm: bool = False) -> np.ndarray:
    """Validate and copy a 3-vector in metres."""
    arr = np.asarray(p, dtype=float).reshape(3).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite ECEF position: {arr}")
    if check_norm:
        norm = float(np.linalg.norm(arr))
        if not 6.0e6 <= norm <= 5.0e7:
            raise ValueError(f"ECEF norm {norm:.1f} m outside [6.0e6, 5.0e7]")
    return arr


@dataclass(frozen=True)
class GeodeticPosition:
    lat: float
    lon: float
    alt: float

    def __post_init__(self) -> None:
        if abs(self.lat) > math.pi / 2:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -math.pi < self.lon <= math.pi:
            object.__setattr__(self, "lon", wrap_longitude(self.lon))

    @classmethod
    def from_degrees(cls, lat_deg: float, lon_deg: float, alt: float) -> "GeodeticPosition":
        return cls(math.radians(lat_deg), wrap_longitude(math.radians(lon_deg)), alt)


@dataclass(frozen=True)
class LookGeometry:
    elevation: float
    azimuth: float
    unit: np.ndarray
    distance: float


def wrap_longitude(lon: float) -> float:
    """Wrap to (-pi, pi]."""
    lon = math.fmod(lon, 2.0 * math.pi)
    if lon > math.pi:
        lon -= 2.0 * math.pi
    elif lon <= -math.pi:
        lon += 2.0 * math.pi
    return lon


def sagnac_range(receiver, satellite) -> float:
    """Euclidean range plus the first-order Earth-rotation term (omega/c)(x*b - a*y)."""
    return float(kernels.sagnac_range(
        np.asarray(receiver, dtype=float), np.asarray(satellite, dtype=float), _OMEGA_OVER_C
    ))


def sagnac_range_many(receivers, satellites) -> np.ndarray:
    rx = np.ascontiguousarray(receivers, dtype=float).reshape(-1, 3)
    sat = np.ascontiguousarray(satellites, dtype=float).reshape(-1, 3)
    return kernels.sagnac_range_many(rx, sat, _OMEGA_OVER_C)


def rot_z(angle: float) -> np.ndarray:
    """Frame rotation about z by ``angle`` (coordinates of a fixed vector)."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_range(receiver, satellite, travel_time: float) -> float:
    """Range after carrying the satellite position into the reception-time frame."""
    if abs(travel_time) >= 1.0:
        raise ValueError("travel_time must be below 1 s")
    rotated = rot_z(OMEGA_IE * travel_time) @ np.asarray(satellite, dtype=float)
    return float(np.linalg.norm(np.asarray(receiver, dtype=float) - rotated))


def geodetic_to_ecef(g: GeodeticPosition) -> np.ndarray:
    sin_lat = math.sin(g.lat)
    cos_lat = math.cos(g.lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    return np.array([
        (n + g.alt) * cos_lat * math.cos(g.lon),
        (n + g.alt) * cos_lat * math.sin(g.lon),
        (n * (1.0 - WGS84_E2) + g.alt) * sin_lat,
    ])


def ecef_to_geodetic(p) -> GeodeticPosition:
    """Bowring's closed form followed by two fixed-point latitude refinements."""
    x, y, z = (float(v) for v in np.asarray(p, dtype=float).reshape(3))
    if math.sqrt(x * x + y * y + z * z) < 1.0:
        raise DegenerateGeometryError("latitude undefined near the geocentre")
    rho = math.hypot(x, y)
    theta = math.atan2(z * WGS84_A, rho * WGS84_B)
    lat = math.atan2(
        z + _EP2 * WGS84_B * math.sin(theta) ** 3,
        rho - WGS84_E2 * WGS84_A * math.cos(theta) ** 3,
    )
    for _ in range(2):
        sin_lat = math.sin(lat)
        n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
        lat = math.atan2(z + WGS84_E2 * n * sin_lat, rho)
    sin_lat = math.sin(lat)
    alt = rho * math.cos(lat) + z * sin_lat - WGS84_A * math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    lon = wrap_longitude(math.atan2(y, x)) if rho > 0.0 else 0.0
    return GeodeticPosition(lat, lon, alt)


def ned_rotation(lat: float, lon: float) -> np.ndarray:
    """Rows are the north, east and down unit vectors in ECEF."""
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array([
        [-sl * co, -sl * so, cl],
        [-so, co, 0.0],
        [-cl * co, -cl * so, -sl],
    ])


def look_geometry(receiver, satellite) -> LookGeometry:
    rx = np.asarray(receiver, dtype=float)
    diff = np.asarray(satellite, dtype=float) - rx
    dist = float(np.linalg.norm(diff))
    if dist == 0.0:
        raise DegenerateGeometryError("receiver and satellite coincide")
    unit = diff / dist
    g = ecef_to_geodetic(rx)
    n, e, d = ned_rotation(g.lat, g.lon) @ unit
    elevation = math.atan2(-d, math.hypot(n, e))
    azimuth = math.atan2(e, n) % (2.0 * math.pi)
    return LookGeometry(elevation, azimuth, unit, dist)


def ned_error(truth, estimate) -> tuple[float, float, float]:
    g = ecef_to_geodetic(truth)
    delta = np.asarray(estimate, dtype=float) - np.asarray(truth, dtype=float)
    n, e, d = ned_rotation(g.lat, g.lon) @ delta
    return float(n), float(e), float(d)
