"""TCP correction server: one session per client, 1 Hz observation stream per virtual base."""

from __future__ import annotations

import asyncio
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import AsyncIterator, Callable, Optional

from .config import ServerConfig
from .errors import EncodeError, RequestError
from .generator import generate_epoch
from .protocol import ClientRequest, parse_request
from .records import iter_records
from .replay import ReplayTimeline, ingest
from .rtcm import encode_frame, encode_msm4, encode_station
from .store import CorrectionStore
from .timesys import GnssTime, gps_time_from_unix

log = logging.getLogger(__name__)

Tick = tuple[GnssTime, CorrectionStore]


class ReplaySource:
    """Epochs and snapshots from a prebuilt timeline; every session replays it from the start."""

    def __init__(self, timeline: ReplayTimeline, pace: Optional[float] = None) -> None:
        self.timeline = timeline
        self.pace = pace

    async def ticks(self) -> AsyncIterator[Tick]:
        for epoch, snapshot in zip(self.timeline.epochs, self.timeline.snapshots):
            yield epoch, snapshot
            if self.pace:
                await asyncio.sleep(self.pace)
            else:
                await asyncio.sleep(0)


class LiveStore:
    """Holds the current snapshot; a single writer swaps it atomically."""

    def __init__(self, store: Optional[CorrectionStore] = None) -> None:
        self.current = store if store is not None else CorrectionStore()
        self._offsets: dict[Path, int] = {}

    def poll_directory(self, path: Path) -> int:
        """Ingest lines appended to ``*.jsonl`` files since the last poll."""
        added = 0
        for file in sorted(Path(path).glob("*.jsonl")):
            offset = self._offsets.get(file, 0)
            with file.open("r", encoding="utf-8") as fh:
                fh.seek(offset)
                text = fh.read()
            complete = text[: text.rfind("\n") + 1]
            if not complete:
                continue
            self._offsets[file] = offset + len(complete.encode("utf-8"))
            records = list(iter_records(complete.splitlines(), str(file)))
            self.current, _ = ingest(self.current, records)
            added += len(records)
        return added


async def epoch_scheduler(
    clock: Callable[[], float] = time.time,
    sleep: Callable[[float], object] = asyncio.sleep,
    limit: Optional[int] = None,
) -> AsyncIterator[GnssTime]:
    """Wall-clock ticks aligned to integer GPS seconds, strictly increasing."""
    last: Optional[GnssTime] = None
    count = 0
    while limit is None or count < limit:
        now = gps_time_from_unix(clock())
        target = GnssTime.normalized(now.system, now.week, float(math.floor(now.tow) + 1))
        if last is not None and target - last <= 0.0:
            target = last + 1.0
        await sleep(max(0.0, target - now))
        last = target
        count += 1
        yield target


class LiveSource:
    def __init__(self, live: LiveStore, data_dir: Optional[Path] = None,
                 clock: Callable[[], float] = time.time) -> None:
        self.live = live
        self.data_dir = data_dir
        self.clock = clock

    async def ticks(self) -> AsyncIterator[Tick]:
        async for t in epoch_scheduler(self.clock):
            if self.data_dir is not None:
                self.live.poll_directory(self.data_dir)
            yield t, self.live.current


@dataclass(eq=False)
class ClientSession:
    peer: str
    request: ClientRequest
    start: Optional[GnssTime] = None
    pending: Optional[ClientRequest] = None
    closed: bool = False
    epochs_sent: int = 0


class VrsServer:
    def __init__(self, source, config: ServerConfig = ServerConfig()) -> None:
        self.source = source
        self.config = config
        self._server: Optional[asyncio.base_events.Server] = None
        self.sessions: set[ClientSession] = set()

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> tuple[str, int]:
        self._server = await asyncio.start_server(self.handle_client, host, port)
        sock = self._server.sockets[0].getsockname()
        log.info("listening host=%s port=%d", sock[0], sock[1])
        return sock[0], sock[1]

    async def serve_forever(self) -> None:
        assert self._server is not None
        async with self._server:
            await self._server.serve_forever()

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    def _station_frame(self, request: ClientRequest) -> bytes:
        return encode_frame(encode_station(request.position, self.config.station_id, request.systems))

    def epoch_frames(self, session: ClientSession, t_b: GnssTime, store: CorrectionStore) -> bytes:
        """All observation frames of one epoch for one session."""
        req = session.request
        lock = t_b - session.start if session.start is not None else 0.0
        obs = generate_epoch(req.position, t_b, store, self.config.generator,
                             req.systems, req.signals, lock)
        out = bytearray()
        for k, system in enumerate(req.systems):
            subset = [o for o in obs if o.system == system]
            more = k < len(req.systems) - 1
            try:
                payload = encode_msm4(subset, t_b, self.config.station_id, system, multiple=more)
            except EncodeError as exc:
                log.warning("peer=%s epoch=%s system=%s encode failed: %s", session.peer, t_b, system, exc)
                payload = encode_msm4([], t_b, self.config.station_id, system, multiple=more)
            out += encode_frame(payload)
        return bytes(out)

    async def _read_updates(self, reader: asyncio.StreamReader, session: ClientSession) -> None:
        try:
            while not session.closed:
                line = await reader.readline()
                if not line:
                    return
                try:
                    session.pending = parse_request(line)
                    log.info("peer=%s position update queued", session.peer)
                except RequestError as exc:
                    log.warning("peer=%s malformed update, closing: %s", session.peer, exc)
                    session.closed = True
                    return
        except (ConnectionError, asyncio.IncompleteReadError):
            session.closed = True

    async def handle_client(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        peer = str(writer.get_extra_info("peername"))
        try:
            line = await asyncio.wait_for(reader.readline(), self.config.request_timeout)
        except asyncio.TimeoutError:
            writer.write(b"ERR request timeout\n")
            await self._close(writer)
            return
        try:
            request = parse_request(line)
        except RequestError as exc:
            log.info("peer=%s rejected request: %s", peer, exc)
            writer.write(f"ERR {exc}\n".encode("ascii", "replace"))
            await self._close(writer)
            return

        session = ClientSession(peer, request)
        self.sessions.add(session)
        log.info("peer=%s session start systems=%s", peer, ",".join(request.systems))
        updates = asyncio.create_task(self._read_updates(reader, session))
        try:
            writer.write(b"OK\n")
            writer.write(self._station_frame(request))
            await writer.drain()
            async for t_b, store in self.source.ticks():
                if session.closed:
                    break
                if session.start is None:
                    session.start = t_b
                if session.pending is not None:
                    session.request, session.pending = session.pending, None
                    writer.write(self._station_frame(session.request))
                writer.write(self.epoch_frames(session, t_b, store))
                await writer.drain()
                session.epochs_sent += 1
        except ConnectionError as exc:
            log.info("peer=%s session torn down: %r", peer, exc)
        finally:
            session.closed = True
            updates.cancel()
            self.sessions.discard(session)
            log.info("peer=%s session end epochs=%d", peer, session.epochs_sent)
            await self._close(writer)

    @staticmethod
    async def _close(writer: asyncio.StreamWriter) -> None:
        try:
            writer.close()
            await writer.wait_closed()
        except (ConnectionError, OSError):
            pass


def load_live_store(data_dir: Optional[Path]) -> LiveStore:
    live = LiveStore()
    if data_dir is not None:
        if not Path(data_dir).is_dir():
            raise FileNotFoundError(f"data directory not found: {data_dir}")
        log.info("loaded data dir=%s records=%d", data_dir, live.poll_directory(Path(data_dir)))
    return live


