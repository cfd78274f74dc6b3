"""Compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--scenes N]

The fallback runs in a child process with ``VRS_FORGE_DISABLE_JIT=1`` because
the switch is read once at import time.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))


def _timed(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def measure(scenes: int) -> dict:
    from helpers import random_scenes
    from vrs_forge import _jit, kernels
    from vrs_forge.ionosphere import PiercePoint, VtecShModel, vtec_sh
    from vrs_forge.rtcm import crc24q
    from vrs_forge.solver import solve_ephemeris
    from vrs_forge.timesys import GnssTime

    cases = random_scenes(scenes, seed=5)
    rng = np.random.default_rng(5)
    c = rng.normal(size=(16, 16))
    model = VtecShModel(15, 15, c, rng.normal(size=(16, 16)), GnssTime("G", 2300, 0.0))
    points = [PiercePoint(float(a), float(b), 1.0) for a, b in rng.uniform(-1.2, 1.2, (scenes, 2))]
    frames = [rng.integers(0, 256, 200, dtype=np.uint8).tobytes() for _ in range(scenes)]

    def solve():
        for eph, clk, base, t_b in cases:
            solve_ephemeris(base, t_b, eph, clk)

    def sh():
        for pp in points:
            vtec_sh(model, pp, 43200.0)

    def crc():
        for f in frames:
            crc24q(f)

    start = time.perf_counter()
    solve_ephemeris(cases[0][2], cases[0][3], cases[0][0], cases[0][1])
    vtec_sh(model, points[0], 0.0)
    crc24q(frames[0])
    kernels.legendre_table(4, 0.1)
    warmup = time.perf_counter() - start
    return {
        "jit": _jit.JIT_ENABLED,
        "warmup_s": warmup,
        "solve_transmit": _timed(solve, 3),
        "vtec_sh_degree15": _timed(sh, 3),
        "crc24q_200B": _timed(crc, 3),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenes", type=int, default=2000)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.child:
        print(json.dumps(measure(args.scenes)))
        return
    env = {k: v for k, v in os.environ.items() if k != "VRS_FORGE_DISABLE_JIT"}
    runs = {}
    for label, flag in (("jit", None), ("python", "1")):
        child_env = dict(env, **({"VRS_FORGE_DISABLE_JIT": flag} if flag else {}))
        out = subprocess.run([sys.executable, __file__, "--child", "--scenes", str(args.scenes)],
                             env=child_env, capture_output=True, text=True, check=True)
        runs[label] = json.loads(out.stdout.strip().splitlines()[-1])
    print(f"{args.scenes} calls per kernel, best of 3")
    print(f"{'kernel':<20}{'jit (ms)':>12}{'python (ms)':>14}{'speedup':>10}")
    for key in ("solve_transmit", "vtec_sh_degree15", "crc24q_200B"):
        a, b = runs["jit"][key], runs["python"][key]
        print(f"{key:<20}{a * 1e3:>12.1f}{b * 1e3:>14.1f}{b / a:>9.1f}x")
    print(f"jit warm-up (compile or cache load): {runs['jit']['warmup_s']:.2f} s")


if __name__ == "__main__":
    main()
