"""Slant tropospheric delay from a gridded empirical zenith-delay model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BelowHorizonError, CoverageError
from .geom import GeodeticPosition

GAMMA = 2.0 * math.pi / 365.25
_HEIGHT_SCALE = {"km": 1.0e-3, "m": 1.0}


@dataclass(frozen=True)
class ZtdCoefficients:
    """Mean, annual cos/sin and semi-annual cos/sin zenith-delay terms in metres."""

    a0: float
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0

    def __post_init__(self) -> None:
        values = (self.a0, self.a1, self.a2, self.a3, self.a4)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("ZTD coefficients must be finite")
        if not 1.0 <= self.a0 <= 3.5:
            raise ValueError(f"mean zenith delay {self.a0:.3f} m outside [1.0, 3.5]")

    def as_array(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.a2, self.a3, self.a4])


def tropo_mapping(elevation: float) -> float:
    if elevation <= 0.0:
        raise BelowHorizonError(f"elevation {elevation:.6f} rad is not above the horizon")
    s = math.sin(elevation)
    return 1.001 / math.sqrt(0.002001 + s * s)


def ztd(coeffs: ZtdCoefficients, t: float) -> float:
    """Zenith delay on fractional day-of-year ``t``."""
    g = GAMMA * t
    return (
        coeffs.a0
        + coeffs.a1 * math.cos(g)
        + coeffs.a2 * math.sin(g)
        + coeffs.a3 * math.cos(2.0 * g)
        + coeffs.a4 * math.sin(2.0 * g)
    )


def slant_tropo(elevation: float, zenith_delay: float) -> float:
    return tropo_mapping(elevation) * zenith_delay


def _strictly_increasing(values: np.ndarray, name: str) -> None:
    if values.ndim != 1 or values.size < 2 or np.any(np.diff(values) <= 0.0):
        raise ValueError(f"{name} must be a strictly increasing vector of at least two nodes")


@dataclass(frozen=True)
class IggTropGrid:
    """Per-node exponential and polynomial height models on a lat/lon grid.

    ``alpha`` is zero-padded to the largest degree; ``degree`` keeps each
    node's own exponent degree.  Latitudes and longitudes are in degrees.
    """

    lats: np.ndarray
    lons: np.ndarray
    degree: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    c_poly: np.ndarray
    height_unit: str = "km"

    def __post_init__(self) -> None:
        lats = np.asarray(self.lats, dtype=float)
        lons = np.asarray(self.lons, dtype=float)
        _strictly_increasing(lats, "lats")
        _strictly_increasing(lons, "lons")
        shape = (lats.size, lons.size)
        degree = np.asarray(self.degree, dtype=int)
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        c_poly = np.asarray(self.c_poly, dtype=float)
        if degree.shape != shape or np.any(degree < 1):
            raise ValueError("every node needs an exponent degree of at least 1")
        if alpha.shape[:2] != shape or alpha.shape[2] < degree.max() + 1:
            raise ValueError("alpha must have shape (nlat, nlon, max_degree + 1)")
        if beta.shape != shape + (4, 6):
            raise ValueError("beta must have shape (nlat, nlon, 4, 6)")
        if c_poly.shape != shape:
            raise ValueError("c_poly must have shape (nlat, nlon)")
        if self.height_unit not in _HEIGHT_SCALE:
            raise ValueError(f"height unit must be 'km' or 'm', got {self.height_unit!r}")
        for name, arr in (("lats", lats), ("lons", lons), ("degree", degree), ("alpha", alpha),
                          ("beta", beta), ("c_poly", c_poly)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def node_coefficients(self, i: int, j: int, height_m: float) -> np.ndarray:
        h = height_m * _HEIGHT_SCALE[self.height_unit]
        m = int(self.degree[i, j])
        out = np.empty(5)
        out[0] = math.exp(float(self.alpha[i, j, : m + 1] @ h ** np.arange(m + 1)))
        out[1:] = self.beta[i, j] @ h ** np.arange(6) + self.c_poly[i, j]
        return out


_EDGE_EPS = 1e-9
_FRACTION_EPS = 1e-12


def _snap(value: float, lo: float, hi: float) -> float:
    if lo - _EDGE_EPS <= value < lo:
        return lo
    if hi < value <= hi + _EDGE_EPS:
        return hi
    return value


def _snap_fraction(f: float) -> float:
    # Points a rounding error away from a node must reproduce the node exactly.
    if abs(f) < _FRACTION_EPS:
        return 0.0
    if abs(f - 1.0) < _FRACTION_EPS:
        return 1.0
    return f


def grid_cell(lats: np.ndarray, lons: np.ndarray, lat_deg: float, lon_deg: float):
    """Locate the cell containing a point.

    Returns (i0, i1, j0, j1, t, u) with fractional offsets t along latitude and
    u along longitude.  Longitude wraps when the grid spans the full circle.
    """
    # Degree/radian round trips land a few ulps off the grid edges.
    lat_deg = _snap(lat_deg, lats[0], lats[-1])
    if not lats[0] <= lat_deg <= lats[-1]:
        raise CoverageError(f"latitude {lat_deg:.4f} deg outside grid [{lats[0]}, {lats[-1]}]")
    i0 = int(np.searchsorted(lats, lat_deg, side="right")) - 1
    i0 = min(max(i0, 0), lats.size - 2)
    i1 = i0 + 1
    t = (lat_deg - lats[i0]) / (lats[i1] - lats[i0])

    lon = lons[0] + (lon_deg - lons[0]) % 360.0
    if lon > lons[0] + 360.0 - _EDGE_EPS:
        lon = lons[0]
    lon = _snap(lon, lons[0], lons[-1])
    if lon <= lons[-1]:
        j0 = int(np.searchsorted(lons, lon, side="right")) - 1
        j0 = min(max(j0, 0), lons.size - 2)
        j1 = j0 + 1
        span = lons[j1] - lons[j0]
        u = (lon - lons[j0]) / span
    else:
        step = lons[1] - lons[0]
        gap = lons[0] + 360.0 - lons[-1]
        if gap > step * (1.0 + 1e-9):
            raise CoverageError(f"longitude {lon_deg:.4f} deg outside grid [{lons[0]}, {lons[-1]}]")
        j0, j1 = lons.size - 1, 0
        u = (lon - lons[-1]) / gap
    return i0, i1, j0, j1, _snap_fraction(t), _snap_fraction(u)


def iggtrop_coeffs(grid: IggTropGrid, pos: GeodeticPosition) -> ZtdCoefficients:
    """Bilinear interpolation of the five ZTD coefficients evaluated at the four cell nodes."""
    i0, i1, j0, j1, t, u = grid_cell(grid.lats, grid.lons, math.degrees(pos.lat), math.degrees(pos.lon))
    corners = (
        ((1.0 - t) * (1.0 - u), i0, j0),
        ((1.0 - t) * u, i0, j1),
        (t * (1.0 - u), i1, j0),
        (t * u, i1, j1),
    )
    acc = np.zeros(5)
    for weight, i, j in corners:
        if weight != 0.0:
            acc += weight * grid.node_coefficients(i, j, pos.alt)
    return ZtdCoefficients(*(float(v) for v in acc))
