"""Scene generators shared by the tests."""

import asyncio
import contextlib
import math
import threading

import numpy as np

from vrs_forge.config import ServerConfig
from vrs_forge.constants import BEIDOU, GALILEO, GPS
from vrs_forge.geom import GeodeticPosition, geodetic_to_ecef
from vrs_forge.synth import constellation
from vrs_forge.server import VrsServer
from vrs_forge.timesys import GnssTime

T0 = GnssTime(GPS, 2300, 345600.0)


def random_base(rng: np.random.Generator) -> np.ndarray:
    lat = math.asin(rng.uniform(-0.95, 0.95))
    lon = rng.uniform(-math.pi, math.pi)
    return geodetic_to_ecef(GeodeticPosition(lat, lon, rng.uniform(-100.0, 3000.0)))


def random_scenes(n: int, seed: int = 1):
    """(eph, clk, base, t_b) tuples drawn from the synthetic constellations."""
    rng = np.random.default_rng(seed)
    fleets = {s: constellation(s, T0, np.random.default_rng(seed + k)) for k, s in enumerate((GPS, GALILEO, BEIDOU))}
    scenes = []
    for _ in range(n):
        fleet = fleets[(GPS, GALILEO, BEIDOU)[rng.integers(3)]]
        eph, clk = fleet[rng.integers(len(fleet))]
        t_b = T0 + float(rng.uniform(-3000.0, 3000.0))
        scenes.append((eph, clk, random_base(rng), t_b))
    return scenes


@contextlib.contextmanager
def running_server(source, config=None):
    """Serve ``source`` from a background event loop; yields (host, port)."""
    loop = asyncio.new_event_loop()
    server = VrsServer(source, config or ServerConfig())
    ready = threading.Event()
    address = []

    def run():
        asyncio.set_event_loop(loop)
        address.append(loop.run_until_complete(server.start()))
        ready.set()
        loop.run_forever()

    thread = threading.Thread(target=run, daemon=True)
    thread.start()
    ready.wait(10.0)
    try:
        yield address[0]
    finally:
        asyncio.run_coroutine_threadsafe(server.close(), loop).result(10.0)
        loop.call_soon_threadsafe(loop.stop)
        thread.join(10.0)
        loop.close()
