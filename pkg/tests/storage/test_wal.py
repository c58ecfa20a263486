"""
Crash recovery: torn WAL tails and damaged segments.
"""

from pathlib import Path

import pytest

from src.core.exceptions import IntegrityException
from src.storage.store import WAL_NAME, Store
from src.storage.types import Cell, PartitionKey
from src.storage.wal import FRAME_HEADER, frame, parse_frames

PK = PartitionKey("ns", "log")


def _wal_path(config) -> Path:
    return Path(config.data_dir) / WAL_NAME


def _write_log(config, clock, count=100):
    with Store.open(config, clock) as s:
        for i in range(count):
            s.put(PK, Cell(f"{i:04d}".encode(), 'v', f"value-{i}".encode() * (i % 4 + 1),
                           clock.now_us() + i))
    return _wal_path(config).read_bytes()


def _frame_ends(data):
    ends = []
    offset = 0
    while offset < len(data):
        length, _ = FRAME_HEADER.unpack_from(data, offset)
        offset += FRAME_HEADER.size + length
        ends.append(offset)
    return ends


def test_parse_frames_every_prefix(storage_config, clock):
    data = _write_log(storage_config, clock)
    ends = _frame_ends(data)
    assert len(ends) == 100
    for cut in range(len(data) + 1):
        mutations, valid = parse_frames(data[:cut])
        complete = sum(1 for end in ends if end <= cut)
        assert len(mutations) == complete
        assert valid == (ends[complete - 1] if complete else 0)
        assert [m.seqno for m in mutations] == list(range(1, complete + 1))


def test_corrupt_frame_stops_replay():
    good = frame(b'not a mutation')
    mutations, valid = parse_frames(good)
    assert mutations == [] and valid == 0


def _reopen_after_cut(config, clock, data, cut):
    _wal_path(config).write_bytes(data[:cut])
    with Store.open(config, clock) as s:
        recovered = [c.clustering for c in s.scan_partition(PK)]
        seqno = s.seqno
    on_disk = _wal_path(config).read_bytes()
    return recovered, seqno, on_disk


def _check_cuts(config, clock, data, cuts):
    ends = _frame_ends(data)
    for cut in cuts:
        recovered, seqno, on_disk = _reopen_after_cut(config, clock, data, cut)
        complete = sum(1 for end in ends if end <= cut)
        assert recovered == [f"{i:04d}".encode() for i in range(complete)]
        assert seqno == complete
        # the torn tail is truncated away
        assert on_disk == data[:ends[complete - 1] if complete else 0]


def test_reopen_at_sampled_offsets(storage_config, clock):
    data = _write_log(storage_config, clock)
    data_len = len(data)
    cuts = sorted({0, 1, 7, data_len // 3, data_len // 2, data_len - 1, data_len}
                  | set(range(0, data_len, max(1, data_len // 25))))
    _check_cuts(storage_config, clock, data, cuts)


@pytest.mark.slow
def test_reopen_at_every_offset(storage_config, clock):
    data = _write_log(storage_config, clock)
    _check_cuts(storage_config, clock, data, range(len(data) + 1))


def test_writes_after_recovery_append_cleanly(storage_config, clock):
    data = _write_log(storage_config, clock, count=10)
    ends = _frame_ends(data)
    _wal_path(storage_config).write_bytes(data[:ends[4] + 3])
    with Store.open(storage_config, clock) as s:
        s.put(PK, Cell(b'new', 'v', b'x', clock.now_us()))
        assert s.seqno == 6
    with Store.open(storage_config, clock) as s:
        assert len(s.scan_partition(PK)) == 6
        assert s.get(PK, b'new', 'v').value == b'x'


def test_damaged_segment_refuses_to_open(storage_config, clock):
    with Store.open(storage_config, clock) as s:
        for i in range(20):
            s.put(PK, Cell(f"{i:02d}".encode(), 'v', b'payload', clock.now_us()))
        s.flush()
    segment = next(Path(storage_config.data_dir).glob('seg-*.colm'))
    raw = bytearray(segment.read_bytes())
    raw[30] ^= 0xFF
    segment.write_bytes(bytes(raw))
    with pytest.raises(IntegrityException):
        Store.open(storage_config, clock)
