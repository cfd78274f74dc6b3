"""Command-line entry point: ``vrs-forge {serve,simulate,decode,gen,synth}``."""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import load_config
from .constants import SYSTEMS
from .errors import VrsError
from .generator import generate_epoch
from .geom import GeodeticPosition, as_ecef, geodetic_to_ecef
from .records import load_directory
from .replay import ingest, load_timeline
from .rover import (
    ErrorModel,
    LiveSnapshots,
    RoverProcessor,
    Trajectory,
    cdf_table,
    metrics,
    run_rover,
    write_csv,
)
from .rtcm import FrameReader, decode_msm4, message_number
from .rtcm.station import STATION_MESSAGE, decode_station_message
from .server import LiveSource, ReplaySource, VrsServer, load_live_store
from .store import CorrectionStore
from .synth import ScenarioSpec, build_scenario, write_scenario
from .timesys import parse_time

log = logging.getLogger("vrs_forge")


def setup_logging(level: str = "INFO") -> None:
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter(
        "ts=%(asctime)s level=%(levelname)s logger=%(name)s msg=\"%(message)s\""))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level.upper())


def _host_port(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def _floats(count: int):
    def parse(text: str) -> tuple[float, ...]:
        parts = text.replace(",", " ").split()
        try:
            values = tuple(float(p) for p in parts)
        except ValueError:
            values = ()
        if len(values) != count:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers, got {text!r}")
        return values
    return parse


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


# serve ------------------------------------------------------------------------


async def _serve(args: argparse.Namespace) -> None:
    config = load_config(args.config)
    if args.replay is not None:
        source = ReplaySource(load_timeline(args.replay, args.data), pace=args.pace)
    else:
        source = LiveSource(load_live_store(args.data), args.data)
    server = VrsServer(source, config)
    await server.start(*args.listen)
    try:
        await server.serve_forever()
    finally:
        await server.close()


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        asyncio.run(_serve(args))
    except KeyboardInterrupt:
        log.info("shutdown")
    return 0


# simulate ---------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.replay is not None:
        timeline = load_timeline(args.replay, args.data)
    elif args.data is not None:
        timeline = LiveSnapshots(args.data)
    else:
        raise SystemExit("simulate needs --replay and/or --data to model the truth measurements")
    trajectory = Trajectory.load(args.truth)
    errors = ErrorModel.load(args.errors)
    processor = RoverProcessor(timeline, trajectory, errors, config.generator)
    base = np.asarray(args.base, dtype=float) if args.base is not None else None
    run = run_rover(*args.server, processor, systems=args.systems, obs_types=args.signals,
                    base=base, update_distance=args.update_distance, timeout=args.timeout)
    write_csv(args.out, run.results)
    report = metrics(run.results)
    print("# summary")
    print(f"epochs_received: {run.epochs_received}")
    print(f"station_messages: {run.station_messages}")
    for key, value in vars(report).items():
        print(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
    if args.cdf is not None:
        table = cdf_table(run.results)
        if args.cdf == "-":
            print("# cdf")
            print(table, end="")
        else:
            Path(args.cdf).write_text(table, encoding="utf-8")
    return 0 if run.results else 1


# decode -----------------------------------------------------------------------


def describe_payload(payload: bytes) -> list[str]:
    number = message_number(payload)
    if number == STATION_MESSAGE:
        st = decode_station_message(payload)
        systems = ",".join(name for name, flag in (("GPS", st.gps), ("GLO", st.glonass), ("GAL", st.galileo)) if flag)
        x, y, z = st.position
        return [f"{number} station={st.station_id} virtual={int(st.virtual)} systems={systems} "
                f"ecef=({x:.4f}, {y:.4f}, {z:.4f})"]
    msm = decode_msm4(payload)
    lines = [f"{msm.message} station={msm.station_id} system={msm.system} epoch_ms={msm.epoch_ms} "
             f"multiple={int(msm.multiple)} n_obs={len(msm.observations)}"]
    for o in msm.observations:
        rho = "invalid" if o.pseudorange is None else f"{o.pseudorange:.4f}"
        lines.append(f"  {o.system}{o.prn:02d} {o.obs_type} pr={rho} cnr={o.cnr} lock={o.lock_indicator}")
    return lines


def cmd_decode(args: argparse.Namespace) -> int:
    raw = Path(args.dump).read_bytes()
    if args.hex:
        raw = bytes.fromhex(raw.decode("ascii").replace("\n", " ").replace(" ", ""))
    reader = FrameReader()
    count = 0
    for payload in reader.feed(raw):
        count += 1
        try:
            print("\n".join(describe_payload(payload)))
        except VrsError as exc:
            print(f"message {message_number(payload)} undecodable: {exc}")
    print(f"# frames={count} discarded_bytes={reader.discarded}")
    return 0


# gen --------------------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    t = parse_time(args.time)
    config = load_config(args.config)
    records = [r for d in args.data for r in load_directory(d) if r.avail is None or r.avail - t <= 0.0]
    store, rejected = ingest(CorrectionStore(), records)
    position = as_ecef(args.pos, check_norm=True)
    obs = generate_epoch(position, t, store, config.generator, args.systems)
    print(f"# epoch {t} position ({position[0]:.3f}, {position[1]:.3f}, {position[2]:.3f}) "
          f"records={len(records)} rejected={rejected}")
    print("sys prn obs pseudorange_m snr_dbhz")
    for o in obs:
        print(f"{o.system} {o.prn:02d} {o.obs_type} {o.pseudorange:.4f} {o.snr}")
    return 0


# synth ------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    lat, lon, alt = args.base
    spec = ScenarioSpec(week=args.week, start_tow=args.tow, epochs=args.epochs, base_lat_deg=lat,
                        base_lon_deg=lon, base_alt=alt, rover_offset_ned=tuple(args.rover_offset),
                        systems=args.systems, seed=args.seed)
    paths = write_scenario(build_scenario(spec), args.out)
    for key, path in paths.items():
        print(f"{key}: {path}")
    base = geodetic_to_ecef(GeodeticPosition.from_degrees(lat, lon, alt))
    print(f"base_ecef: {base[0]:.3f},{base[1]:.3f},{base[2]:.3f}")
    return 0


# parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vrs-forge", description="Virtual reference station toolkit.")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the correction server")
    p.add_argument("--listen", type=_host_port, default=("127.0.0.1", 2101), metavar="HOST:PORT")
    p.add_argument("--data", type=Path, help="directory of correction records (*.jsonl)")
    p.add_argument("--replay", type=Path, help="replay directory; every session replays it from the start")
    p.add_argument("--config", type=Path, help="JSON configuration file")
    p.add_argument("--pace", type=float, default=None, help="seconds between replay epochs (default: no wait)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="rover client: request a virtual base and fix positions")
    p.add_argument("--server", type=_host_port, required=True, metavar="HOST:PORT")
    p.add_argument("--truth", type=Path, required=True, help="trajectory file (JSON)")
    p.add_argument("--errors", type=Path, help="rover error model (JSON)")
    p.add_argument("--out", type=Path, required=True, help="per-epoch CSV output")
    p.add_argument("--data", type=Path, help="correction records used to model the truth measurements")
    p.add_argument("--replay", type=Path, help="replay directory matching the server's")
    p.add_argument("--config", type=Path, help="same JSON configuration as the server")
    p.add_argument("--cdf", nargs="?", const="-", default=None, metavar="PATH",
                   help="emit the error CDF table (stdout when no path is given)")
    p.add_argument("--systems", type=_csv_list, default=SYSTEMS)
    p.add_argument("--signals", type=_csv_list, default=("C1C", "C2I"))
    p.add_argument("--base", type=_floats(3), default=None, metavar="X,Y,Z",
                   help="virtual base ECEF (default: trajectory base or start position); "
                        "write --base=X,Y,Z when X is negative")
    p.add_argument("--update-distance", type=float, default=None,
                   help="send a position update when the rover moves this far (m)")
    p.add_argument("--timeout", type=float, default=60.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decode", help="print the messages in a frame dump")
    p.add_argument("dump", type=Path)
    p.add_argument("--hex", action="store_true", help="the dump is hex text")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("gen", help="print one epoch of virtual observations")
    p.add_argument("--pos", type=_floats(3), required=True, metavar="X,Y,Z",
                   help="ECEF metres; write --pos=X,Y,Z when X is negative")
    p.add_argument("--time", required=True, metavar="WEEK:TOW")
    p.add_argument("--data", type=Path, nargs="+", required=True, help="one or more record directories")
    p.add_argument("--config", type=Path)
    p.add_argument("--systems", type=_csv_list, default=SYSTEMS)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("synth", help="write a synthetic correction scenario")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--week", type=int, default=2300)
    p.add_argument("--tow", type=float, default=345600.0)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--base", type=_floats(3), default=(40.0, 116.0, 50.0), metavar="LAT,LON,ALT")
    p.add_argument("--rover-offset", type=_floats(3), default=(300.0, 200.0, 0.0), metavar="N,E,D")
    p.add_argument("--systems", type=_csv_list, default=SYSTEMS)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except (VrsError, ValueError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
