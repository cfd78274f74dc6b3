import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vrs_forge.errors import DegenerateGeometryError
from vrs_forge.geom import ecef_to_geodetic, ned_rotation, sagnac_range
from vrs_forge.rover import (
    CSV_HEADER,
    CorrectedMeasurement,
    ErrorModel,
    RoverMeasurementModel,
    RoverProcessor,
    Trajectory,
    cdf_table,
    empirical_cdf,
    metrics,
    run_rover,
    spp_solve,
    write_csv,
)
from vrs_forge.server import ReplaySource
from vrs_forge.timesys import GnssTime

from helpers import T0, running_server


def _sky(position, n, rng, radius=2.66e7):
    g = ecef_to_geodetic(position)
    rot = ned_rotation(g.lat, g.lon)
    sats = []
    for _ in range(n):
        az, el = rng.uniform(0, 2 * math.pi), rng.uniform(math.radians(15), math.radians(85))
        los_ned = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), -math.sin(el)])
        u = rot.T @ los_ned
        # distance along the line of sight so that the satellite sits on the shell
        b = position @ u
        d = -b + math.sqrt(b * b - position @ position + radius * radius)
        sats.append(position + d * u)
    return sats


def _measurements(position, clocks, rng, systems=("G", "E", "C"), per_system=5):
    out = []
    for s in systems:
        for k, sat in enumerate(_sky(position, per_system, rng)):
            sat_clock = rng.uniform(-3e5, 3e5)
            value = sagnac_range(position, sat) + clocks[s] - sat_clock
            out.append(CorrectedMeasurement(s, k + 1, "C1C", value, sat, sat_clock))
    return out


def test_spp_recovers_exact_position():
    rng = np.random.default_rng(3)
    truth = np.array([-2148744.0, 4426641.0, 4044655.0])
    clocks = {"G": 1234.5, "E": -50.0, "C": 800.25}
    meas = _measurements(truth, clocks, rng)
    sol = spp_solve(meas, truth + np.array([3000.0, -2000.0, 1500.0]))
    assert np.linalg.norm(sol.position - truth) < 1e-6
    for s in clocks:
        assert sol.clocks[s] == pytest.approx(clocks[s], abs=1e-6)
    assert np.max(np.abs(sol.residuals)) < 1e-6


def test_dops_match_textbook_oracle():
    rng = np.random.default_rng(4)
    truth = np.array([4027894.0, 307045.0, 4919474.0])
    meas = _measurements(truth, {"G": 0.0}, rng, systems=("G",), per_system=8)
    sol = spp_solve(meas, truth)
    # Oracle: plain unit vectors (no rotation term), local frame, one clock.
    g = ecef_to_geodetic(truth)
    rot = ned_rotation(g.lat, g.lon)
    rows = []
    for m in meas:
        u = rot @ (truth - m.satellite) / np.linalg.norm(truth - m.satellite)
        rows.append([*u, 1.0])
    q = np.linalg.inv(np.array(rows).T @ np.array(rows))
    assert sol.hdop == pytest.approx(math.sqrt(q[0, 0] + q[1, 1]), rel=1e-4)
    assert sol.vdop == pytest.approx(math.sqrt(q[2, 2]), rel=1e-4)
    assert sol.pdop == pytest.approx(math.sqrt(np.trace(q[:3, :3])), rel=1e-4)
    assert sol.gdop == pytest.approx(math.sqrt(np.trace(q)), rel=1e-4)
    assert sol.pdop ** 2 == pytest.approx(sol.hdop ** 2 + sol.vdop ** 2, rel=1e-9)


def test_spp_rejects_underdetermined():
    rng = np.random.default_rng(5)
    truth = np.array([6378137.0, 0.0, 0.0])
    meas = _measurements(truth, {"G": 0.0, "E": 0.0}, rng, systems=("G", "E"), per_system=2)
    with pytest.raises(DegenerateGeometryError):
        spp_solve(meas[:4], truth)


def test_gauss_markov_multipath_statistics():
    model = RoverMeasurementModel(ErrorModel(multipath_sigma=0.5, multipath_tau=10.0, seed=11))
    values = np.array([model.multipath(("G", 1, "C1C"), T0 + float(k)) for k in range(40000)])
    assert values.std() == pytest.approx(0.5, rel=0.05)
    lag1 = np.corrcoef(values[:-1], values[1:])[0, 1]
    assert lag1 == pytest.approx(math.exp(-0.1), abs=0.02)


def test_noise_and_clock_terms():
    e = ErrorModel(receiver_clock=1e-6, receiver_clock_drift=1e-9, noise_sigma=0.3, seed=2)
    model = RoverMeasurementModel(e, T0)
    assert model.receiver_clock(T0 + 100.0) == pytest.approx(1e-6 + 1e-7)
    noise = np.array([model.noise() for _ in range(20000)])
    assert noise.std() == pytest.approx(0.3, rel=0.05)
    assert RoverMeasurementModel(ErrorModel()).multipath(("G", 1, "C1C"), T0) == 0.0


def test_error_model_rejects_unknown_keys(tmp_path):
    with pytest.raises(ValueError, match="unknown"):
        ErrorModel.from_dict({"noise": 1.0})
    path = tmp_path / "e.json"
    path.write_text(json.dumps({"noise_sigma": 0.2, "system_bias": {"C": 1e-8}}))
    assert ErrorModel.load(path).system_bias == {"C": 1e-8}
    assert ErrorModel.load(None) == ErrorModel()


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=60),
       st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=10))
def test_empirical_cdf_matches_counting(values, thresholds):
    got = empirical_cdf(values, thresholds)
    for t, frac in zip(thresholds, got):
        assert frac == sum(v <= t for v in values) / len(values)
    ordered = sorted(thresholds)
    assert empirical_cdf(values, ordered) == sorted(empirical_cdf(values, ordered))


def test_empirical_cdf_empty():
    assert all(math.isnan(v) for v in empirical_cdf([], [1.0, 2.0]))


def test_trajectory_interpolation_and_roundtrip(tmp_path):
    samples = [[100.0, 0.0, 0.0, 0.0], [110.0, 10.0, -20.0, 5.0]]
    path = tmp_path / "t.json"
    path.write_text(json.dumps({"week": 2300, "samples": samples[::-1], "base": [1.0, 2.0, 3.0]}))
    traj = Trajectory.load(path)
    assert np.allclose(traj.at(GnssTime("G", 2300, 105.0)), [5.0, -10.0, 2.5])
    assert np.allclose(traj.at(GnssTime("G", 2300, 50.0)), [0.0, 0.0, 0.0])
    assert np.allclose(traj.at(GnssTime("C", 2300 - 1356, 96.0)), [10.0, -20.0, 5.0])
    assert np.allclose(traj.at(GnssTime("C", 2300 - 1356, 91.0)), [5.0, -10.0, 2.5])
    path.write_text(json.dumps(traj.to_dict()))
    assert np.array_equal(Trajectory.load(path).positions, traj.positions)
    static = Trajectory.static([1.0, 2.0, 3.0])
    assert np.array_equal(static.at(T0), [1.0, 2.0, 3.0])
    path.write_text(json.dumps({"samples": [[1, 2, 3]]}))
    with pytest.raises(ValueError):
        Trajectory.load(path)


@pytest.fixture(scope="module")
def clean_run(scenario, timeline):
    traj = Trajectory.static(scenario.spec.rover, scenario.spec.base)
    proc = RoverProcessor(timeline, traj)
    with running_server(ReplaySource(timeline)) as (host, port):
        return run_rover(host, port, proc, timeout=20.0)


def test_rover_end_to_end(clean_run, timeline):
    assert clean_run.epochs_received == len(timeline)
    assert clean_run.station_messages == 1
    assert len(clean_run.results) == len(timeline)
    report = metrics(clean_run.results)
    assert report.he_max < 0.1
    assert report.residual_max < 0.02
    assert report.pr_he_1m == 1.0
    for r in clean_run.results:
        assert r.n_meas >= 15
        assert r.solution.hdop < 2.0


def test_csv_and_cdf_outputs(clean_run, tmp_path):
    path = tmp_path / "out.csv"
    write_csv(path, clean_run.results)
    lines = path.read_text().splitlines()
    assert lines[0] + "\n" == CSV_HEADER
    assert len(lines) == len(clean_run.results) + 1
    assert all(len(l.split(",")) == len(CSV_HEADER.split(",")) for l in lines)
    table = cdf_table(clean_run.results).splitlines()
    assert table[0] == "threshold_m,pr_he,pr_ve,pr_3d"
    assert table[-1] == "5,1.0000,1.0000,1.0000"


def test_rover_position_updates(scenario, timeline):
    spec = scenario.spec
    start = spec.rover
    moving = Trajectory(np.array([spec.start_tow, spec.start_tow + 19]),
                        np.array([start, start + np.array([800.0, -600.0, 0.0])]), spec.week, None)
    proc = RoverProcessor(timeline, moving)
    with running_server(ReplaySource(timeline, pace=0.02)) as (host, port):
        run = run_rover(host, port, proc, update_distance=200.0, timeout=20.0)
    assert run.station_messages >= 3
    assert metrics(run.results).he_max < 0.1
