"""
Store reads, writes, durability and maintenance.
"""

import pytest

from src.core.exceptions import (
    CellTooLargeException,
    StorageException,
    StoreClosedException,
    ValidationException,
)
from src.storage.store import Store
from src.storage.types import Cell, PartitionKey
from src.utils.clock import US_PER_SECOND

PK = PartitionKey("ns", "alice")
OTHER = PartitionKey("ns", "bob")


def test_get_returns_newest_version(store, clock):
    t = clock.now_us()
    store.put(PK, Cell(b'c1', 'name', b'v1', t))
    store.put(PK, Cell(b'c1', 'name', b'v2', t + 10))
    cell = store.get(PK, b'c1', 'name')
    assert cell.value == b'v2'
    assert cell.timestamp == t + 10


def test_get_as_of_reads_history(store, clock):
    t = clock.now_us()
    store.put(PK, Cell(b'c1', 'name', b'v1', t))
    store.put(PK, Cell(b'c1', 'name', b'v2', t + 10))
    assert store.get(PK, b'c1', 'name', as_of=t + 5).value == b'v1'
    assert store.get(PK, b'c1', 'name', as_of=t - 1) is None


def test_older_timestamp_does_not_shadow_newer(store, clock):
    t = clock.now_us()
    store.put(PK, Cell(b'c1', 'name', b'new', t + 10))
    store.put(PK, Cell(b'c1', 'name', b'late-but-old', t))
    assert store.get(PK, b'c1', 'name').value == b'new'


def test_same_slot_put_replaces(store, clock):
    t = clock.now_us()
    store.put(PK, Cell(b'c1', 'name', b'first', t))
    store.put(PK, Cell(b'c1', 'name', b'second', t))
    assert store.get(PK, b'c1', 'name').value == b'second'


def test_tombstone_hides_value(store, clock):
    t = clock.now_us()
    store.put(PK, Cell(b'c1', 'name', b'v1', t))
    store.delete(PK, b'c1', 'name', t + 1)
    assert store.get(PK, b'c1', 'name') is None
    assert store.get(PK, b'c1', 'name', as_of=t).value == b'v1'


def test_ttl_expiry(store, clock):
    t = clock.now_us()
    store.put(PK, Cell(b'c1', 'session', b'x', t, ttl_s=10))
    clock.advance(seconds=10)
    assert store.get(PK, b'c1', 'session') is not None
    clock.advance(seconds=1)
    assert store.get(PK, b'c1', 'session') is None


def test_range_scan_bounds_inclusive(store, clock):
    t = clock.now_us()
    for c in (b'a', b'b', b'c', b'd'):
        store.put(PK, Cell(c, 'v', c * 2, t))
    store.put(OTHER, Cell(b'b', 'v', b'other', t))
    cells = store.range_scan(PK, b'b', b'c')
    assert [c.clustering for c in cells] == [b'b', b'c']
    assert store.range_scan(PK, b'd', b'a') == []


def test_scan_partition_one_version_per_cell(store, clock):
    t = clock.now_us()
    store.put(PK, Cell(b'a', 'x', b'1', t))
    store.put(PK, Cell(b'a', 'x', b'2', t + 1))
    store.put(PK, Cell(b'a', 'y', b'3', t))
    cells = store.scan_partition(PK)
    assert [(c.column, c.value) for c in cells] == [('x', b'2'), ('y', b'3')]


def test_partitions_lists_namespace_only(store, clock):
    t = clock.now_us()
    store.put(PK, Cell(b'a', 'x', b'1', t))
    store.put(OTHER, Cell(b'a', 'x', b'1', t))
    store.put(PartitionKey("ns2", "alice"), Cell(b'a', 'x', b'1', t))
    assert store.partitions("ns") == [PK, OTHER]
    assert store.partitions("ns", "bo") == [OTHER]


def test_oversized_cell_rejected(store, storage_config, clock):
    big = b'x' * (storage_config.max_cell_bytes + 1)
    with pytest.raises(CellTooLargeException):
        store.put(PK, Cell(b'a', 'x', big, clock.now_us()))


def test_tombstone_with_value_rejected():
    with pytest.raises(ValidationException):
        Cell(b'a', 'x', b'v', 1, tombstone=True)


def test_namespace_separator_rejected():
    with pytest.raises(ValidationException):
        PartitionKey("bad\x1fns", "e")


def test_closed_store_rejects_operations(store, clock):
    store.close()
    with pytest.raises(StoreClosedException):
        store.put(PK, Cell(b'a', 'x', b'1', clock.now_us()))
    with pytest.raises(StoreClosedException):
        store.get(PK, b'a', 'x')


def test_reopen_replays_wal(storage_config, clock):
    t = clock.now_us()
    with Store.open(storage_config, clock) as s:
        s.put(PK, Cell(b'a', 'x', b'1', t))
        s.delete(PK, b'a', 'x', t + 1)
        s.put(PK, Cell(b'b', 'x', b'2', t))
        before = s.dump()
        seqno = s.seqno
    with Store.open(storage_config, clock) as s:
        assert s.dump() == before
        assert s.seqno == seqno
        assert s.get(PK, b'b', 'x').value == b'2'


def test_flush_then_reopen_reads_segments(storage_config, clock):
    t = clock.now_us()
    with Store.open(storage_config, clock) as s:
        for i in range(50):
            s.put(PK, Cell(f"{i:03d}".encode(), 'x', str(i).encode(), t))
        segment_id = s.flush()
        assert segment_id is not None
        assert s.stats()['memtable_entries'] == 0
        assert s.stats()['wal_bytes'] == 0
        s.put(PK, Cell(b'999', 'x', b'tail', t))
        before = s.dump()
    with Store.open(storage_config, clock) as s:
        assert s.dump() == before
        assert len(s.range_scan(PK, b'000', b'999')) == 51


def test_flush_empty_memtable_is_noop(store):
    assert store.flush() is None


@pytest.mark.parametrize('codec', [0, 1])
def test_codecs_round_trip_through_disk(storage_config, clock, codec):
    config = storage_config.model_copy(update={'codec': codec, 'block_entries': 4})
    t = clock.now_us()
    with Store.open(config, clock) as s:
        for i in range(30):
            s.put(PartitionKey("ns", f"e{i % 3}"), Cell(f"c{i}".encode(), 'col', bytes([i]) * i, t + i,
                                                        ttl_s=3600 if i % 5 == 0 else None))
        s.delete(PartitionKey("ns", "e0"), b'c3', 'col', t + 100)
        s.flush()
        before = s.dump()
    with Store.open(config, clock) as s:
        assert s.dump() == before


def test_memtable_threshold_triggers_flush(storage_config, clock):
    config = storage_config.model_copy(update={'memtable_flush_bytes': 512})
    with Store.open(config, clock) as s:
        for i in range(40):
            s.put(PK, Cell(f"{i:03d}".encode(), 'x', b'y' * 32, clock.now_us()))
        assert s.stats()['segments'] >= 1


def test_compaction_preserves_visible_state(store, clock):
    t = clock.now_us()
    for round_ in range(3):
        for i in range(10):
            store.put(PK, Cell(f"{i}".encode(), 'x', f"{round_}".encode(), t + round_))
        store.flush()
    visible = store.scan_all()
    stats = store.compact()
    assert len(stats.input_segments) == 3
    assert store.segment_ids == [stats.output_segment]
    assert store.scan_all() == visible


def test_compaction_drops_tombstones_past_grace(store, storage_config, clock):
    t = clock.now_us()
    store.put(PK, Cell(b'a', 'x', b'1', t))
    store.delete(PK, b'a', 'x', t + 1)
    store.put(PK, Cell(b'b', 'x', b'2', t))
    store.flush()

    store.compact()
    assert store.stats()['segment_entries'] == 3

    clock.advance(seconds=storage_config.grace_seconds + 1)
    store.compact()
    assert store.stats()['segment_entries'] == 1
    assert store.get(PK, b'a', 'x') is None
    assert store.get(PK, b'b', 'x').value == b'2'


def test_compaction_keeps_history_inside_horizon(store, storage_config, clock):
    t = clock.now_us()
    store.put(PK, Cell(b'a', 'x', b'1', t))
    store.put(PK, Cell(b'a', 'x', b'2', t + 1))
    store.compact()
    assert store.get(PK, b'a', 'x', as_of=t).value == b'1'

    clock.advance(seconds=storage_config.retention_horizon_seconds + 1)
    store.compact()
    assert store.get(PK, b'a', 'x').value == b'2'
    assert store.stats()['segment_entries'] == 1


def test_interrupted_compaction_is_cleaned_on_open(storage_config, clock, mocker):
    t = clock.now_us()
    with Store.open(storage_config, clock) as s:
        s.put(PK, Cell(b'a', 'x', b'1', t))
        s.flush()
        s.put(PK, Cell(b'b', 'x', b'2', t))
        s.flush()
        before = s.dump()
        # the output lands but the inputs are never unlinked
        mocker.patch('pathlib.Path.unlink', side_effect=OSError("disk gone"))
        s.compact()
        mocker.stopall()
    with Store.open(storage_config, clock) as s:
        assert s.dump() == before
        assert len(s.segment_ids) == 1


def test_failed_background_compaction_reaches_the_next_write(store, clock, mocker):
    t = clock.now_us()
    store.put(PK, Cell(b'a', 'x', b'1', t))
    mocker.patch.object(store, 'compact', side_effect=OSError("disk full"))
    store._background_compact()
    with pytest.raises(StorageException, match="disk full"):
        store.put(PK, Cell(b'b', 'x', b'2', t))
    assert store.get(PK, b'b', 'x') is None
    store.put(PK, Cell(b'b', 'x', b'2', t))
    assert store.get(PK, b'b', 'x').value == b'2'


def test_failed_background_compaction_reaches_close(storage_config, clock, mocker):
    s = Store.open(storage_config, clock)
    mocker.patch.object(s, 'compact', side_effect=OSError("bad block"))
    s._background_compact()
    with pytest.raises(StorageException):
        s.close()
    assert s.closed
    s.close()
