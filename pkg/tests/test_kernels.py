import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from vrs_forge import _jit

TESTS = Path(__file__).parent

PROBE = """
import json, math
import numpy as np
from vrs_forge import _jit, kernels
from vrs_forge.constants import C_LIGHT
from vrs_forge.solver import solve_ephemeris
from helpers import random_scenes

out = {"jit": _jit.JIT_ENABLED, "solve": [], "legendre": None, "crc": None}
for eph, clk, base, t_b in random_scenes(40, seed=9):
    s = solve_ephemeris(base, t_b, eph, clk)
    out["solve"].append([s.t_p, *s.state.position.tolist(), s.iterations])
out["legendre"] = kernels.legendre_table(6, 0.3).ravel().tolist()
data = np.frombuffer(b"123456789" * 7, dtype=np.uint8)
out["crc"] = int(kernels.crc24q_kernel(data, kernels.CRC24Q_TABLE))
out["sagnac"] = kernels.sagnac_range(np.array([6.4e6, 1e5, 2e5]), np.array([1.5e7, 2e7, 5e6]), 7.2921151467e-5 / C_LIGHT)
print(json.dumps(out))
"""


def _probe(disable: str | None) -> dict:
    env = {k: v for k, v in os.environ.items() if k != "VRS_FORGE_DISABLE_JIT"}
    if disable is not None:
        env["VRS_FORGE_DISABLE_JIT"] = disable
    done = subprocess.run([sys.executable, "-c", PROBE], cwd=TESTS, env=env,
                          capture_output=True, text=True, timeout=300, check=True)
    return json.loads(done.stdout.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def probes():
    return _probe(None), _probe("1")


def test_flag_selects_path(probes):
    jit, plain = probes
    assert jit["jit"] is True
    assert plain["jit"] is False


def test_jit_and_python_paths_agree(probes):
    jit, plain = probes
    a, b = np.array(jit["solve"]), np.array(plain["solve"])
    assert np.array_equal(a[:, 4], b[:, 4])
    assert np.max(np.abs(a[:, 0] - b[:, 0])) < 1e-14
    assert np.max(np.abs(a[:, 1:4] - b[:, 1:4])) < 1e-6
    assert np.allclose(jit["legendre"], plain["legendre"], rtol=1e-13, atol=1e-15)
    assert jit["crc"] == plain["crc"]
    assert jit["sagnac"] == pytest.approx(plain["sagnac"], abs=1e-8)


@pytest.mark.parametrize("value, enabled", [("1", False), ("true", False), ("YES", False), (" on ", False),
                                            ("0", True), ("", True), ("no", True)])
def test_flag_parsing(value, enabled):
    code = "from vrs_forge import _jit; print(_jit.JIT_REQUESTED)"
    env = {**os.environ, "VRS_FORGE_DISABLE_JIT": value}
    done = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert done.stdout.strip() == str(enabled)


def test_identity_decorator_when_disabled(monkeypatch):
    monkeypatch.setattr(_jit, "JIT_ENABLED", False)

    def f(x):
        return x + 1

    assert _jit.njit(f) is f
    assert _jit.njit(fastmath=False)(f) is f
