"""Immutable snapshot of the latest correction products.

Each ``with_*`` method returns a new snapshot; readers holding an older one
never observe a partial update.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, NamedTuple, Optional

from .ephemeris import BroadcastEphemeris, ClockModel
from .errors import ConsistencyError, StaleDataError
from .ionosphere import VtecGrid, VtecShModel
from .ssr import ClockCorrection, CodeBias, OrbitCorrection
from .troposphere import IggTropGrid

SatKey = tuple  # (system, prn)

_EMPTY: Mapping = MappingProxyType({})


class SatelliteProducts(NamedTuple):
    eph: BroadcastEphemeris
    clk: ClockModel
    orbit: OrbitCorrection
    clock: ClockCorrection


def _frozen_update(mapping: Mapping, key, value) -> Mapping:
    new = dict(mapping)
    new[key] = value
    return MappingProxyType(new)


@dataclass(frozen=True)
class CorrectionStore:
    ephemerides: Mapping = field(default=_EMPTY)
    orbits: Mapping = field(default=_EMPTY)
    clocks: Mapping = field(default=_EMPTY)
    biases: Mapping = field(default=_EMPTY)
    vtec_sh: Optional[VtecShModel] = None
    vtec_grid: Optional[VtecGrid] = None
    tropo_grid: Optional[IggTropGrid] = None

    def with_ephemeris(self, eph: BroadcastEphemeris, clk: ClockModel) -> "CorrectionStore":
        key = (eph.system, eph.prn)
        per_iod = _frozen_update(self.ephemerides.get(key, _EMPTY), eph.iod, (eph, clk))
        return dataclasses.replace(self, ephemerides=_frozen_update(self.ephemerides, key, per_iod))

    def with_orbit(self, corr: OrbitCorrection) -> "CorrectionStore":
        key = (corr.system, corr.prn)
        old = self.orbits.get(key)
        if old is not None and corr.t_o - old.t_o < 0.0:
            raise StaleDataError(f"orbit correction for {key} goes back in time")
        return dataclasses.replace(self, orbits=_frozen_update(self.orbits, key, corr))

    def with_clock(self, corr: ClockCorrection) -> "CorrectionStore":
        key = (corr.system, corr.prn)
        old = self.clocks.get(key)
        if old is not None and corr.t_c - old.t_c < 0.0:
            raise StaleDataError(f"clock correction for {key} goes back in time")
        return dataclasses.replace(self, clocks=_frozen_update(self.clocks, key, corr))

    def with_bias(self, bias: CodeBias) -> "CorrectionStore":
        key = (bias.system, bias.prn, bias.obs_type)
        old = self.biases.get(key)
        if old is not None and old.time is not None and bias.time is not None and bias.time - old.time < 0.0:
            raise StaleDataError(f"code bias for {key} goes back in time")
        return dataclasses.replace(self, biases=_frozen_update(self.biases, key, bias))

    def with_vtec_sh(self, model: VtecShModel) -> "CorrectionStore":
        if self.vtec_sh is not None and model.epoch - self.vtec_sh.epoch < 0.0:
            raise StaleDataError("VTEC model goes back in time")
        return dataclasses.replace(self, vtec_sh=model)

    def with_vtec_grid(self, grid: VtecGrid) -> "CorrectionStore":
        if self.vtec_grid is not None and grid.time - self.vtec_grid.time < 0.0:
            raise StaleDataError("VTEC grid goes back in time")
        return dataclasses.replace(self, vtec_grid=grid)

    def with_tropo_grid(self, grid: IggTropGrid) -> "CorrectionStore":
        return dataclasses.replace(self, tropo_grid=grid)

    def apply(self, item) -> "CorrectionStore":
        """Advance the snapshot by one parsed record."""
        if isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], BroadcastEphemeris):
            return self.with_ephemeris(*item)
        if isinstance(item, OrbitCorrection):
            return self.with_orbit(item)
        if isinstance(item, ClockCorrection):
            return self.with_clock(item)
        if isinstance(item, CodeBias):
            return self.with_bias(item)
        if isinstance(item, VtecShModel):
            return self.with_vtec_sh(item)
        if isinstance(item, VtecGrid):
            return self.with_vtec_grid(item)
        if isinstance(item, IggTropGrid):
            return self.with_tropo_grid(item)
        raise TypeError(f"cannot store {type(item).__name__}")

    def satellites(self, system: str) -> list[int]:
        return sorted(prn for (sys, prn) in self.ephemerides if sys == system)

    def products(self, system: str, prn: int) -> SatelliteProducts:
        """Ephemeris and SSR records sharing one IOD."""
        key = (system, prn)
        orbit = self.orbits.get(key)
        clock = self.clocks.get(key)
        if orbit is None or clock is None:
            raise ConsistencyError(f"{system}{prn:02d}: missing orbit or clock correction")
        if orbit.iod != clock.iod:
            raise ConsistencyError(f"{system}{prn:02d}: orbit IOD {orbit.iod} != clock IOD {clock.iod}")
        entry = self.ephemerides.get(key, _EMPTY).get(orbit.iod)
        if entry is None:
            raise ConsistencyError(f"{system}{prn:02d}: no ephemeris with IOD {orbit.iod}")
        eph, clk = entry
        return SatelliteProducts(eph, clk, orbit, clock)
