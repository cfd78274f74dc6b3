import asyncio
import json

import numpy as np
import pytest

from vrs_forge.config import ServerConfig
from vrs_forge.protocol import format_request
from vrs_forge.records import clock_record
from vrs_forge.replay import ReplayTimeline, integer_epochs
from vrs_forge.rtcm import FrameReader, decode_msm4, message_number
from vrs_forge.rtcm.station import decode_station
from vrs_forge.server import LiveStore, ReplaySource, VrsServer, epoch_scheduler
from vrs_forge.ssr import ClockCorrection
from vrs_forge.timesys import GnssTime, gps_time_from_unix


async def _session(server, line, updates=(), read_limit=None):
    """Run one client; ``updates`` maps epoch counts to extra request lines."""
    host, port = await server.start()
    reader, writer = await asyncio.open_connection(host, port)
    if line is not None:
        writer.write(line.encode())
        await writer.drain()
    status = await reader.readline()
    frames = FrameReader()
    messages = []
    epochs = 0
    pending = dict(updates)
    while True:
        data = await reader.read(65536)
        if not data:
            break
        for payload in frames.feed(data):
            number = message_number(payload)
            if number == 1005:
                messages.append(("station", decode_station(payload)))
                continue
            msm = decode_msm4(payload)
            messages.append(("msm", msm))
            if not msm.multiple:
                epochs += 1
                if epochs in pending:
                    writer.write(pending.pop(epochs).encode())
                    await writer.drain()
    writer.close()
    await server.close()
    return status.decode(), messages, epochs


def _request(pos, systems=("G", "E", "C")):
    return format_request(pos, systems, ("C1C", "C2I"))


def test_replay_session_stream(scenario, timeline):
    server = VrsServer(ReplaySource(timeline))
    status, msgs, epochs = asyncio.run(_session(server, _request(scenario.spec.base)))
    assert status == "OK\n"
    assert epochs == len(timeline)
    assert msgs[0][0] == "station"
    assert np.allclose(msgs[0][1], scenario.spec.base, atol=1e-4)
    msm = [m for kind, m in msgs if kind == "msm"]
    assert len(msm) == 3 * len(timeline)
    for k in range(len(timeline)):
        group = msm[3 * k:3 * k + 3]
        assert [m.system for m in group] == ["G", "E", "C"]
        assert [m.multiple for m in group] == [True, True, False]
        assert group[0].epoch_ms == int(timeline.epochs[k].tow * 1000)
        assert all(len(m.observations) > 0 for m in group)


def test_request_errors_are_reported():
    server = VrsServer(ReplaySource(ReplayTimeline((), ())))
    status, msgs, _ = asyncio.run(_session(server, "HELLO\n"))
    assert status.startswith("ERR") and msgs == []


def test_request_timeout():
    server = VrsServer(ReplaySource(ReplayTimeline((), ())), ServerConfig(request_timeout=0.2))
    status, _, _ = asyncio.run(_session(server, None))
    assert status == "ERR request timeout\n"


def test_empty_epochs_still_emit_messages():
    epochs = integer_epochs(2300, 345600.0, 4)
    server = VrsServer(ReplaySource(ReplayTimeline.build([], epochs)))
    status, msgs, n = asyncio.run(_session(server, _request([6.4e6, 0, 0], ("G", "C"))))
    assert status == "OK\n" and n == 4
    msm = [m for kind, m in msgs if kind == "msm"]
    assert len(msm) == 8 and all(m.observations == () for m in msm)


def test_position_update_applies_at_next_epoch(scenario, timeline):
    moved = scenario.spec.base + np.array([500.0, -300.0, 100.0])
    server = VrsServer(ReplaySource(timeline, pace=0.05))
    status, msgs, epochs = asyncio.run(_session(server, _request(scenario.spec.base), {3: _request(moved)}))
    assert epochs == len(timeline)
    stations = [k for k, (kind, _) in enumerate(msgs) if kind == "station"]
    assert len(stations) == 2
    assert np.allclose(msgs[stations[1]][1], moved, atol=1e-4)
    # The new station message precedes a complete epoch; nothing is dropped.
    assert msgs[stations[1] + 1][1].system == "G"


def test_malformed_update_closes_session(scenario, timeline):
    server = VrsServer(ReplaySource(timeline, pace=0.05))
    _, _, epochs = asyncio.run(_session(server, _request(scenario.spec.base), {2: "garbage\n"}))
    assert epochs < len(timeline)


def test_scheduler_is_strictly_increasing_under_jitter():
    rng = np.random.default_rng(2)
    state = {"now": 1.7e9 + 0.37}

    def clock():
        return state["now"]

    async def sleep(dt):
        state["now"] += dt + rng.uniform(-0.2, 0.6)

    async def collect():
        return [t async for t in epoch_scheduler(clock, sleep, limit=100)]

    ticks = asyncio.run(collect())
    assert len(ticks) == 100
    assert all(t.tow == int(t.tow) for t in ticks)
    gaps = [b - a for a, b in zip(ticks, ticks[1:])]
    assert all(g >= 1.0 for g in gaps)
    assert ticks[0] - gps_time_from_unix(1.7e9 + 0.37) > 0


def test_scheduler_real_clock():
    async def collect():
        return [t async for t in epoch_scheduler(limit=2)]

    a, b = asyncio.run(collect())
    assert b - a == 1.0


def test_live_store_tails_files(tmp_path):
    t = GnssTime("G", 2300, 100.0)
    lines = [json.dumps(clock_record(ClockCorrection("G", k, 1, t, 0.5))) + "\n" for k in (1, 2, 3)]
    path = tmp_path / "clk.jsonl"
    path.write_text(lines[0] + lines[1][:20])
    live = LiveStore()
    assert live.poll_directory(tmp_path) == 1
    with path.open("a") as fh:
        fh.write(lines[1][20:] + lines[2])
    assert live.poll_directory(tmp_path) == 2
    assert live.poll_directory(tmp_path) == 0
    assert sorted(live.current.clocks) == [("G", 1), ("G", 2), ("G", 3)]


@pytest.mark.parametrize("systems", [("G",), ("E", "C")])
def test_sessions_are_reproducible(scenario, timeline, systems):
    async def grab():
        server = VrsServer(ReplaySource(timeline))
        host, port = await server.start()
        reader, writer = await asyncio.open_connection(host, port)
        writer.write(_request(scenario.spec.base, systems).encode())
        data = await reader.read()
        writer.close()
        await server.close()
        return data

    assert asyncio.run(grab()) == asyncio.run(grab())
