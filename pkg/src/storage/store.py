"""
Embedded wide-column store: WAL + memtable + sealed segments.
"""

import threading
from concurrent.futures import Future, ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

from ..core.config import StorageConfig
from ..core.exceptions import (
    CellTooLargeException,
    StorageException,
    StoreClosedException,
    ValidationException,
)
from ..core.logger import StructuredLogger
from ..utils.clock import Clock, SystemClock, US_PER_SECOND
from ..utils.serialization import canonical_json
from .memtable import Memtable
from .segment import Segment, load_segment, parse_segment_id, segment_path, write_segment
from .types import (
    Cell,
    CompactionStats,
    Entry,
    Mutation,
    MutationBatch,
    PartitionKey,
    SlotKey,
    namespace_prefix,
    slot_key,
)
from .wal import WriteAheadLog

log = StructuredLogger(__name__)

WAL_NAME = 'wal.log'
_LOW = float('-inf')
_HIGH = float('inf')

PartitionRange = Tuple[Optional[PartitionKey], Optional[PartitionKey]]


def _partition_bounds(pk: bytes) -> Tuple[tuple, tuple]:
    return (pk, b'', '', _LOW), (pk + b'\x00', b'', '', _LOW)


def _cell_bounds(pk: bytes, clustering: bytes, column: str) -> Tuple[tuple, tuple]:
    return (pk, clustering, column, _LOW), (pk, clustering, column, _HIGH)


class Store:
    """A single-directory store instance.

    Reads may run from any thread. Writes are serialized on the WAL; flush
    and compaction build new segments outside the write lock and swap them in.
    """

    def __init__(self, config: StorageConfig, clock: Optional[Clock] = None,
                 directory: Optional[Union[str, Path]] = None):
        self.config = config
        self.clock = clock or SystemClock()
        self.directory = Path(directory or config.data_dir)
        self._lock = threading.RLock()
        self._compaction_lock = threading.Lock()
        self._memtable = Memtable()
        self._segments: List[Segment] = []
        self._seqno = 0
        self._next_segment_id = 1
        self._closed = True
        self._wal = WriteAheadLog(self.directory / WAL_NAME, fsync=config.wal_fsync)
        self._executor: Optional[ThreadPoolExecutor] = None
        self._pending: Optional[Future] = None
        self._compaction_error: Optional[Exception] = None

    @classmethod
    def open(cls, config: StorageConfig, clock: Optional[Clock] = None,
             directory: Optional[Union[str, Path]] = None) -> 'Store':
        store = cls(config, clock, directory)
        store._open()
        return store

    def _open(self):
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageException(f"Cannot create data directory {self.directory}: {e}")

        for stray in self.directory.glob('*.tmp'):
            stray.unlink()

        loaded = []
        highest = 0
        for path in sorted(self.directory.glob('seg-*.colm')):
            segment_id = parse_segment_id(path)
            if segment_id is None:
                continue
            loaded.append(load_segment(path))
            highest = max(highest, segment_id)

        superseded = set()
        for segment in loaded:
            superseded.update(segment.compacted_from)
        for segment in loaded:
            if segment.id in superseded:
                log.info("Removing superseded segment", segment_id=segment.id)
                segment.path.unlink()
        self._segments = sorted((s for s in loaded if s.id not in superseded), key=lambda s: s.id)
        self._next_segment_id = max([highest] + list(superseded)) + 1

        replayed = self._wal.replay()
        for mutation in replayed:
            self._memtable.put(slot_key(mutation.partition.to_bytes(), mutation.cell),
                               self._entry(mutation.cell, mutation.seqno))
        self._wal.open()

        self._seqno = max([s.max_seqno for s in self._segments] + [m.seqno for m in replayed] + [0])
        self._closed = False
        log.info("Store opened", directory=str(self.directory), segments=len(self._segments),
                 replayed=len(replayed), seqno=self._seqno)

    @staticmethod
    def _entry(cell: Cell, seqno: int) -> Entry:
        return Entry(cell.value, cell.ttl_s, cell.tombstone, seqno)

    def _check_open(self):
        if self._closed:
            raise StoreClosedException("Store is closed", {'directory': str(self.directory)})

    def _raise_compaction_error(self):
        """Report a failed background compaction once, to the next writer or to close."""
        error, self._compaction_error = self._compaction_error, None
        if error is not None:
            raise StorageException(f"Background compaction failed: {error}",
                                   {'error': type(error).__name__}) from error

    def _check_cell(self, partition: PartitionKey, cell: Cell):
        if not isinstance(partition, PartitionKey) or not isinstance(cell, Cell):
            raise ValidationException("put requires a PartitionKey and a Cell")
        if len(cell.value) > self.config.max_cell_bytes:
            raise CellTooLargeException(
                f"Cell value of {len(cell.value)} bytes exceeds {self.config.max_cell_bytes}",
                {'partition': str(partition), 'column': cell.column})

    # Writes

    def put(self, partition: PartitionKey, cell: Cell) -> int:
        """Log and apply a cell write; returns its seqno."""
        self._check_cell(partition, cell)
        with self._lock:
            self._check_open()
            self._raise_compaction_error()
            seqno = self._append(Mutation(partition, cell, self._seqno + 1))
        self._maybe_flush()
        return seqno

    def delete(self, partition: PartitionKey, clustering: bytes, column: str, timestamp: int) -> int:
        return self.put(partition, Cell(clustering, column, b'', timestamp, None, True))

    def _append(self, mutation: Mutation) -> int:
        self._wal.append(mutation)
        self._seqno = mutation.seqno
        self._memtable.put(slot_key(mutation.partition.to_bytes(), mutation.cell),
                           self._entry(mutation.cell, mutation.seqno))
        return mutation.seqno

    def _maybe_flush(self):
        if self._memtable.approximate_bytes >= self.config.memtable_flush_bytes:
            self.flush()

    # Reads

    def _merged(self, lo: tuple, hi: tuple) -> List[Tuple[SlotKey, Entry]]:
        """Entries in [lo, hi) with memtable shadowing newer segments shadowing older."""
        with self._lock:
            self._check_open()
            newest = self._memtable.range(lo, hi)
            segments = list(self._segments)
        slots: Dict[SlotKey, Entry] = {}
        for segment in segments:
            for key, entry in segment.range(lo, hi):
                slots[key] = entry
        for key, entry in newest:
            slots[key] = entry
        return sorted(slots.items())

    def get(self, partition: PartitionKey, clustering: bytes, column: str,
            as_of: Optional[int] = None) -> Optional[Cell]:
        """Newest version at or before ``as_of``; absent if that version is dead."""
        lo, hi = _cell_bounds(partition.to_bytes(), clustering, column)
        now = self.clock.now_us()
        for key, entry in self._merged(lo, hi):
            timestamp = -key[3]
            if as_of is not None and timestamp > as_of:
                continue
            cell = entry.to_cell(clustering, column, timestamp)
            return cell if cell.live(now) else None
        return None

    def range_scan(self, partition: PartitionKey, clustering_low: bytes, clustering_high: bytes,
                   as_of: Optional[int] = None) -> List[Cell]:
        """One visible version per (clustering, column) with low <= clustering <= high."""
        if clustering_low > clustering_high:
            return []
        pk = partition.to_bytes()
        lo = (pk, clustering_low, '', _LOW)
        hi = (pk, clustering_high + b'\x00', '', _LOW)
        return self._visible(self._merged(lo, hi), as_of)

    def scan_partition(self, partition: PartitionKey, as_of: Optional[int] = None) -> List[Cell]:
        lo, hi = _partition_bounds(partition.to_bytes())
        return self._visible(self._merged(lo, hi), as_of)

    def _visible(self, items: List[Tuple[SlotKey, Entry]], as_of: Optional[int]) -> List[Cell]:
        now = self.clock.now_us()
        cells = []
        current = None
        for key, entry in items:
            timestamp = -key[3]
            if as_of is not None and timestamp > as_of:
                continue
            cell_id = (key[0], key[1], key[2])
            if cell_id == current:
                continue
            current = cell_id
            cell = entry.to_cell(key[1], key[2], timestamp)
            if cell.live(now):
                cells.append(cell)
        return cells

    def iter_visible(self, namespace: Optional[str] = None,
                     as_of: Optional[int] = None) -> Iterator[Tuple[PartitionKey, Cell]]:
        """Every visible cell, optionally restricted to one namespace."""
        if namespace is None:
            lo, hi = (b'', b'', '', _LOW), (b'\xff' * 8, b'', '', _LOW)
        else:
            prefix = namespace_prefix(namespace)
            lo, hi = (prefix, b'', '', _LOW), (prefix[:-1] + b'\x20', b'', '', _LOW)
        items = self._merged(lo, hi)
        start = 0
        while start < len(items):
            pk = items[start][0][0]
            end = start
            while end < len(items) and items[end][0][0] == pk:
                end += 1
            partition = PartitionKey.from_bytes(pk)
            for cell in self._visible(items[start:end], as_of):
                yield partition, cell
            start = end

    def scan_all(self, as_of: Optional[int] = None) -> List[Tuple[PartitionKey, Cell]]:
        return list(self.iter_visible(None, as_of))

    def partitions(self, namespace: str, entity_prefix: str = '') -> List[PartitionKey]:
        """Partitions of a namespace holding any retained data."""
        prefix = namespace_prefix(namespace) + entity_prefix.encode('utf-8')
        lo = (prefix, b'', '', _LOW)
        hi = (namespace_prefix(namespace)[:-1] + b'\x20', b'', '', _LOW)
        seen = []
        for key, _ in self._merged(lo, hi):
            if key[0].startswith(prefix) and (not seen or seen[-1] != key[0]):
                seen.append(key[0])
        return [PartitionKey.from_bytes(pk) for pk in seen]

    def dump(self) -> bytes:
        """Canonical bytes of every retained version, seqnos excluded."""
        items = self._merged((b'', b'', '', _LOW), (b'\xff' * 8, b'', '', _LOW))
        rows = [[k[0].hex(), k[1].hex(), k[2], -k[3], e.value.hex(), e.ttl_s or 0, e.tombstone]
                for k, e in items]
        return canonical_json(rows)

    # Maintenance

    def _allocate_segment_id(self) -> int:
        segment_id = self._next_segment_id
        self._next_segment_id += 1
        return segment_id

    def flush(self) -> Optional[int]:
        """Seal the memtable into a new segment. Returns None when empty."""
        with self._lock:
            self._check_open()
            if not len(self._memtable):
                return None
            segment_id = self._allocate_segment_id()
            segment = write_segment(self.directory, segment_id, list(self._memtable.items()),
                                    self.config.codec, self.config.block_entries,
                                    fsync=self.config.wal_fsync)
            self._segments.append(segment)
            self._memtable = Memtable()
            self._wal.reset()
            log.debug("Memtable flushed", segment_id=segment_id, entries=len(segment))
        self._schedule_compaction()
        return segment_id

    def _schedule_compaction(self):
        threshold = self.config.auto_compact_segments
        if not threshold or len(self._segments) < threshold:
            return
        if self._pending is not None and not self._pending.done():
            return
        if self._executor is None:
            self._executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix='colma-compact')
        self._pending = self._executor.submit(self._background_compact)

    def _background_compact(self):
        try:
            self.compact()
        except StoreClosedException:
            pass
        except Exception as e:
            log.error("Background compaction failed", exception=e)
            self._compaction_error = e

    def compact(self, partition_range: Optional[PartitionRange] = None) -> CompactionStats:
        """Merge every segment overlapping the range into one new segment."""
        with self._compaction_lock:
            self.flush()
            lo = hi = None
            if partition_range is not None:
                lo = partition_range[0].to_bytes() if partition_range[0] else None
                hi = partition_range[1].to_bytes() if partition_range[1] else None

            with self._lock:
                self._check_open()
                segments = list(self._segments)
                selected = [s for s in segments if s.overlaps(lo, hi)]
                while selected:
                    span_lo = min(s.min_key for s in selected)
                    span_hi = max(s.max_key for s in selected)
                    extra = [s for s in segments if s not in selected and s.overlaps(span_lo, span_hi)]
                    if not extra:
                        break
                    selected.extend(extra)
                if not selected:
                    return CompactionStats()
                selected.sort(key=lambda s: s.id)
                output_id = self._allocate_segment_id()

            slots: Dict[SlotKey, Entry] = {}
            for segment in selected:
                for key, entry in segment.items():
                    slots[key] = entry
            items = sorted(slots.items())
            kept = self._retain(items, self.clock.now_us())

            output = write_segment(self.directory, output_id, kept, self.config.codec,
                                   self.config.block_entries,
                                   compacted_from=[s.id for s in selected],
                                   fsync=self.config.wal_fsync)
            selected_ids = {s.id for s in selected}
            with self._lock:
                self._segments = sorted(
                    [s for s in self._segments if s.id not in selected_ids] + [output],
                    key=lambda s: s.id)
            for segment in selected:
                try:
                    segment.path.unlink()
                except OSError as e:
                    log.warning("Could not remove compacted segment", segment_id=segment.id, error=str(e))

            stats = CompactionStats([s.id for s in selected], output_id,
                                    sum(len(s) for s in selected), len(kept))
            log.info("Compaction finished", **stats.to_dict())
            return stats

    def _retain(self, items: List[Tuple[SlotKey, Entry]], now: int) -> List[Tuple[SlotKey, Entry]]:
        """Apply grace and retention-horizon rules to versions grouped per cell."""
        grace = self.config.grace_seconds * US_PER_SECOND
        horizon_cut = now - self.config.retention_horizon_seconds * US_PER_SECOND
        kept = []
        current = None
        position = 0
        stopped = False
        for key, entry in items:
            cell_id = key[:3]
            if cell_id != current:
                current = cell_id
                position = 0
                stopped = False
            elif stopped:
                continue
            timestamp = -key[3]
            dead_since = None
            if entry.tombstone:
                dead_since = timestamp
            elif entry.ttl_s and now > timestamp + entry.ttl_s * US_PER_SECOND:
                dead_since = timestamp + entry.ttl_s * US_PER_SECOND
            if dead_since is not None and dead_since + grace <= now:
                stopped = True
                continue
            if position == 0 or timestamp > horizon_cut:
                kept.append((key, entry))
                position += 1
            else:
                stopped = True
        return kept

    # Replication

    def sync_delta(self, partition: PartitionKey, since_seqno: int) -> MutationBatch:
        """Retained versions of a partition written after ``since_seqno``, in seqno order."""
        lo, hi = _partition_bounds(partition.to_bytes())
        mutations = [Mutation(partition, entry.to_cell(key[1], key[2], -key[3]), entry.seqno)
                     for key, entry in self._merged(lo, hi) if entry.seqno > since_seqno]
        mutations.sort(key=lambda m: m.seqno)
        return MutationBatch(partition, mutations)

    def _lookup_slot(self, key: SlotKey) -> Optional[Entry]:
        entry = self._memtable.get(key)
        if entry is not None:
            return entry
        for segment in reversed(self._segments):
            entry = segment.get(key)
            if entry is not None:
                return entry
        return None

    def apply_delta(self, batch: MutationBatch) -> int:
        """Apply replica mutations; equal slots resolve to the larger (tombstone, value, ttl)."""
        for mutation in batch.mutations:
            self._check_cell(mutation.partition, mutation.cell)
        with self._lock:
            self._check_open()
            self._raise_compaction_error()
            for mutation in sorted(batch.mutations, key=lambda m: m.seqno):
                key = slot_key(mutation.partition.to_bytes(), mutation.cell)
                existing = self._lookup_slot(key)
                if existing is not None:
                    current = existing.to_cell(key[1], key[2], -key[3])
                    if current.resolution_key() >= mutation.cell.resolution_key():
                        continue
                self._append(Mutation(mutation.partition, mutation.cell, self._seqno + 1))
            seqno = self._seqno
        self._maybe_flush()
        return seqno

    # Lifecycle

    @property
    def seqno(self) -> int:
        return self._seqno

    @property
    def segment_ids(self) -> List[int]:
        return [s.id for s in self._segments]

    def stats(self) -> Dict[str, int]:
        with self._lock:
            return {
                'seqno': self._seqno,
                'segments': len(self._segments),
                'segment_entries': sum(len(s) for s in self._segments),
                'memtable_entries': len(self._memtable),
                'memtable_bytes': self._memtable.approximate_bytes,
                'wal_bytes': self._wal.size(),
            }

    def close(self):
        if self._pending is not None:
            try:
                self._pending.result()
            except Exception:
                pass
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
        with self._lock:
            if self._closed:
                return
            self._wal.close()
            self._closed = True
        log.info("Store closed", directory=str(self.directory), seqno=self._seqno)
        self._raise_compaction_error()

    @property
    def closed(self) -> bool:
        return self._closed

    def __enter__(self) -> 'Store':
        return self

    def __exit__(self, *exc):
        self.close()


def open_store(config: StorageConfig, clock: Optional[Clock] = None,
               directory: Optional[Union[str, Path]] = None) -> Store:
    """Open (creating if needed) the store rooted at the configured directory."""
    return Store.open(config, clock, directory)
