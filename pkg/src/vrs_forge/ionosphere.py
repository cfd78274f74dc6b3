"""Single-layer ionosphere: pierce points, spherical-harmonic and gridded VTEC, slant delay."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .constants import DEFAULT_CONSTANTS, IONO_K, TECU
from .errors import BelowHorizonError, DegenerateGeometryError
from .geom import look_geometry
from .timesys import GnssTime
from .troposphere import grid_cell

STEC_GUARD = 0.05


@dataclass(frozen=True)
class PiercePoint:
    lat: float
    lon: float
    elevation: float
    position: Optional[np.ndarray] = None


@dataclass(frozen=True)
class VtecShModel:
    """Spherical-harmonic VTEC coefficients C[n, m], S[n, m] in TECU."""

    degree: int
    order: int
    c: np.ndarray
    s: np.ndarray
    epoch: GnssTime
    height: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0 <= self.order <= self.degree:
            raise ValueError("order must satisfy 0 <= M <= N")
        shape = (self.degree + 1, self.order + 1)
        for name in ("c", "s"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class VtecGrid:
    """VTEC in TECU on a rectangular lat/lon grid (degrees)."""

    lats: np.ndarray
    lons: np.ndarray
    values: np.ndarray
    time: GnssTime

    def __post_init__(self) -> None:
        lats = np.array(self.lats, dtype=float)
        lons = np.array(self.lons, dtype=float)
        values = np.array(self.values, dtype=float)
        if lats.ndim != 1 or lats.size < 2 or np.any(np.diff(lats) <= 0):
            raise ValueError("lats must be strictly increasing")
        if lons.ndim != 1 or lons.size < 2 or np.any(np.diff(lons) <= 0):
            raise ValueError("lons must be strictly increasing")
        if values.shape != (lats.size, lons.size):
            raise ValueError("values must have shape (len(lats), len(lons))")
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise ValueError("VTEC values must be finite and non-negative")
        for name, arr in (("lats", lats), ("lons", lons), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def pierce_point(base, satellite, h_m: float = DEFAULT_CONSTANTS.h_m,
                 r_e: float = DEFAULT_CONSTANTS.r_e) -> PiercePoint:
    """Where the base-to-satellite ray crosses the sphere of radius r_e + h_m."""
    base = np.asarray(base, dtype=float)
    look = look_geometry(base, satellite)
    if look.elevation <= 0.0:
        raise BelowHorizonError("pierce point requires a satellite above the horizon")
    shell = r_e + h_m
    b = float(base @ look.unit)
    disc = b * b - (float(base @ base) - shell * shell)
    if disc < 0.0:
        raise DegenerateGeometryError("ray does not reach the ionospheric shell")
    s = -b + math.sqrt(disc)
    if s < 0.0:
        raise DegenerateGeometryError("ionospheric shell lies behind the receiver")
    point = base + s * look.unit
    lat = math.asin(max(-1.0, min(1.0, point[2] / shell)))
    lon = math.atan2(point[1], point[0])
    return PiercePoint(lat, lon, look.elevation, point)


def sun_fixed_longitude(lon_pp: float, t: float) -> float:
    """Longitude relative to the 14:00 local-time meridian, in [0, 2 pi)."""
    value = (lon_pp + (t - 50400.0) * math.pi / 43200.0) % (2.0 * math.pi)
    return 0.0 if value >= 2.0 * math.pi else value


def legendre_normalized(n: int, m: int, x: float) -> float:
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    if abs(x) > 1.0:
        raise ValueError("|x| must not exceed 1")
    return float(kernels.legendre_table(n, float(x))[n, m])


def vtec_sh(model: VtecShModel, pp: PiercePoint, t: float) -> float:
    """VTEC in TECU; ``t`` is the epoch in seconds (reduced modulo one day)."""
    lam = sun_fixed_longitude(pp.lon, t % 86400.0)
    p = kernels.legendre_table(model.degree, math.sin(pp.lat))
    ms = np.arange(model.order + 1) * lam
    return float(kernels.sh_sum(p, np.cos(ms), np.sin(ms), model.c, model.s, model.degree, model.order))


def obliquity(elevation: float, r_e: float = DEFAULT_CONSTANTS.r_e,
              h_m: float = DEFAULT_CONSTANTS.h_m) -> float:
    if not 0.0 <= elevation <= math.pi / 2:
        raise ValueError("elevation must lie in [0, pi/2]")
    k = r_e * math.cos(elevation) / (r_e + h_m)
    return 1.0 / math.sqrt(1.0 - k * k)


def stec_sh(vtec: float, pp: PiercePoint, mapping: str = "sum",
            r_e: float = DEFAULT_CONSTANTS.r_e, h_m: float = DEFAULT_CONSTANTS.h_m) -> float:
    """Slant TEC from VTEC.

    ``mapping="sum"`` divides by sin(E + lat_pp); ``mapping="standard"`` uses the
    thin-shell obliquity factor instead.
    """
    if mapping == "standard":
        return vtec * obliquity(pp.elevation, r_e, h_m)
    if mapping != "sum":
        raise ValueError(f"unknown mapping {mapping!r}")
    s = math.sin(pp.elevation + pp.lat)
    if s <= STEC_GUARD:
        raise BelowHorizonError(f"sin(E + lat_pp) = {s:.4f} below {STEC_GUARD}")
    return vtec / s


def _corner_weights(grid: VtecGrid, pp: PiercePoint):
    lat = math.degrees(pp.lat)
    lon = math.degrees(pp.lon)
    i0, i1, j0, j1, t, u = grid_cell(grid.lats, grid.lons, lat, lon)
    dlat = grid.lats[i1] - grid.lats[i0]
    dlon = (grid.lons[j1] - grid.lons[j0]) % 360.0 or 360.0
    corners = ((i0, j0, t, u), (i0, j1, t, 1.0 - u), (i1, j0, 1.0 - t, u), (i1, j1, 1.0 - t, 1.0 - u))
    dists = []
    for i, j, ft, fu in corners:
        d = math.hypot(ft * dlat, fu * dlon)
        if d <= 1e-12:
            return [(i, j, 1.0)]
        dists.append((i, j, d))
    inv = [1.0 / d for _, _, d in dists]
    total = sum(inv)
    return [(i, j, a / total) for (i, j, _), a in zip(dists, inv)]


def grid_weights(grid: VtecGrid, pp: PiercePoint) -> np.ndarray:
    """Inverse-distance weights over all nodes (row-major), non-zero only at the 4 cell corners."""
    w = np.zeros(grid.values.shape)
    for i, j, weight in _corner_weights(grid, pp):
        w[i, j] += weight
    return w.ravel()


def vtec_grid(grid: VtecGrid, pp: PiercePoint) -> float:
    return float(sum(weight * grid.values[i, j] for i, j, weight in _corner_weights(grid, pp)))


def stec_grid(vtec: float, pp: PiercePoint, r_e: float = DEFAULT_CONSTANTS.r_e,
              h_m: float = DEFAULT_CONSTANTS.h_m) -> float:
    return obliquity(pp.elevation, r_e, h_m) * vtec


def iono_delay(frequency: float, stec: float) -> float:
    """Code delay in metres for ``stec`` TECU on ``frequency`` Hz."""
    if frequency <= 0.0:
        raise ValueError("frequency must be positive")
    if stec < 0.0:
        raise ValueError("STEC must be non-negative")
    return IONO_K * stec * TECU / (frequency * frequency)
