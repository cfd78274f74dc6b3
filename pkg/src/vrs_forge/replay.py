"""Replay timelines: per-epoch store snapshots built by a single writer."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import VrsError
from .records import TimedRecord, load_directory
from .store import CorrectionStore
from .timesys import GnssTime

log = logging.getLogger(__name__)

MANIFEST = "replay.json"


def ingest(store: CorrectionStore, records: Iterable[TimedRecord]) -> tuple[CorrectionStore, int]:
    """Apply records in order; returns the new snapshot and the number rejected."""
    rejected = 0
    for rec in records:
        try:
            store = store.apply(rec.item)
        except VrsError as exc:
            rejected += 1
            log.warning("rejected record kind=%s reason=%s", rec.kind, exc)
    return store, rejected


@dataclass(frozen=True)
class ReplayTimeline:
    epochs: tuple[GnssTime, ...]
    snapshots: tuple[CorrectionStore, ...]

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def start(self) -> GnssTime:
        return self.epochs[0]

    def index_of(self, t: GnssTime) -> Optional[int]:
        for k, epoch in enumerate(self.epochs):
            if abs(epoch - t) < 1e-6:
                return k
        return None

    def snapshot_at(self, t: GnssTime) -> CorrectionStore:
        k = self.index_of(t)
        if k is None:
            raise KeyError(f"epoch {t} not in replay")
        return self.snapshots[k]

    @classmethod
    def build(
        cls,
        records: Sequence[TimedRecord],
        epochs: Sequence[GnssTime],
        base: Optional[CorrectionStore] = None,
    ) -> "ReplayTimeline":
        """Snapshot the store at each epoch, including records available by then."""
        store = base if base is not None else CorrectionStore()
        initial = [r for r in records if r.avail is None]
        timed = sorted((r for r in records if r.avail is not None),
                       key=lambda r: (r.avail.week, r.avail.tow))
        store, _ = ingest(store, initial)
        snapshots = []
        k = 0
        for epoch in epochs:
            batch = []
            while k < len(timed) and timed[k].avail - epoch <= 0.0:
                batch.append(timed[k])
                k += 1
            store, _ = ingest(store, batch)
            snapshots.append(store)
        return cls(tuple(epochs), tuple(snapshots))


def integer_epochs(week: int, start_tow: float, count: int) -> list[GnssTime]:
    start = GnssTime.normalized("G", week, float(math.ceil(start_tow - 1e-9)))
    return [start + k for k in range(count)]


def replay_epochs(path: Path, records: Sequence[TimedRecord]) -> list[GnssTime]:
    """Epochs from ``replay.json`` when present, otherwise spanned by record availability."""
    manifest = Path(path) / MANIFEST
    if manifest.exists():
        spec = json.loads(manifest.read_text(encoding="utf-8"))
        return integer_epochs(int(spec["week"]), float(spec["start_tow"]), int(spec["epochs"]))
    times = [r.avail for r in records if r.avail is not None]
    if not times:
        raise ValueError(f"{path}: no {MANIFEST} and no timed records to derive epochs from")
    first = min(times, key=lambda t: (t.week, t.tow))
    last = max(times, key=lambda t: (t.week, t.tow))
    start = first + (math.ceil(first.tow - 1e-9) - first.tow)
    count = int(math.floor(last - start + 1e-9)) + 1
    return [start + k for k in range(count)]


def load_timeline(
    replay_dir: Optional[Path] = None,
    data_dir: Optional[Path] = None,
) -> ReplayTimeline:
    """Static records from ``data_dir`` seed the store; ``replay_dir`` supplies the timeline."""
    base = CorrectionStore()
    if data_dir is not None:
        base, rejected = ingest(base, load_directory(Path(data_dir)))
        log.info("loaded static data dir=%s rejected=%d", data_dir, rejected)
    if replay_dir is None:
        raise ValueError("a replay directory is required to build a timeline")
    records = load_directory(Path(replay_dir))
    epochs = replay_epochs(Path(replay_dir), records)
    timeline = ReplayTimeline.build(records, epochs, base)
    log.info("replay ready dir=%s epochs=%d records=%d", replay_dir, len(timeline), len(records))
    return timeline
