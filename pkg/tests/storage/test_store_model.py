"""
Stateful comparison of the store against a dictionary model.
"""

import shutil
import tempfile

import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.stateful import RuleBasedStateMachine, invariant, rule

from src.core.config import StorageConfig
from src.storage.store import Store
from src.storage.types import Cell, PartitionKey
from src.utils.clock import ManualClock

T0 = 1_700_000_000_000_000

partitions = st.sampled_from([PartitionKey("ns", "a"), PartitionKey("ns", "b"), PartitionKey("other", "a")])
clusterings = st.sampled_from([b'', b'\x00', b'k1', b'k2', b'k2\x00', b'\xff'])
columns = st.sampled_from(['x', 'y'])
timestamps = st.integers(min_value=T0 - 50, max_value=T0)
values = st.binary(min_size=0, max_size=12)


class StoreModel(RuleBasedStateMachine):
    """Random puts, deletes, flushes, compactions and reopens checked against a shadow map."""

    def __init__(self):
        super().__init__()
        self.directory = tempfile.mkdtemp(prefix="colma-model-")
        self.config = StorageConfig(data_dir=self.directory, memtable_flush_bytes=2048,
                                    block_entries=3, auto_compact_segments=0)
        self.clock = ManualClock(T0)
        self.store = Store.open(self.config, self.clock)
        # (partition, clustering, column) -> {timestamp: (value, tombstone)}
        self.model = {}

    def _record(self, partition, clustering, column, timestamp, value, tombstone):
        self.model.setdefault((partition, clustering, column), {})[timestamp] = (value, tombstone)

    @rule(partition=partitions, clustering=clusterings, column=columns, timestamp=timestamps, value=values)
    def put(self, partition, clustering, column, timestamp, value):
        self.store.put(partition, Cell(clustering, column, value, timestamp))
        self._record(partition, clustering, column, timestamp, value, False)

    @rule(partition=partitions, clustering=clusterings, column=columns, timestamp=timestamps)
    def delete(self, partition, clustering, column, timestamp):
        self.store.delete(partition, clustering, column, timestamp)
        self._record(partition, clustering, column, timestamp, b'', True)

    @rule()
    def flush(self):
        self.store.flush()

    @rule()
    def compact(self):
        self.store.compact()

    @rule()
    def reopen(self):
        self.store.close()
        self.store = Store.open(self.config, self.clock)

    def _expected(self, partition, low, high):
        out = []
        for (p, clustering, column), versions in sorted(self.model.items(), key=lambda kv: (kv[0][1], kv[0][2])):
            if p != partition or not (low <= clustering <= high):
                continue
            newest = max(versions)
            value, tombstone = versions[newest]
            if not tombstone:
                out.append((clustering, column, value, newest))
        return out

    @rule(partition=partitions, low=clusterings, high=clusterings)
    def range_scan_matches(self, partition, low, high):
        cells = self.store.range_scan(partition, low, high)
        got = [(c.clustering, c.column, c.value, c.timestamp) for c in cells]
        expected = self._expected(partition, low, high) if low <= high else []
        assert got == expected

    @invariant()
    def point_reads_match(self):
        for (partition, clustering, column), versions in self.model.items():
            newest = max(versions)
            value, tombstone = versions[newest]
            cell = self.store.get(partition, clustering, column)
            if tombstone:
                assert cell is None
            else:
                assert cell is not None and cell.value == value

    def teardown(self):
        self.store.close()
        shutil.rmtree(self.directory, ignore_errors=True)


TestStoreModel = StoreModel.TestCase
TestStoreModel.settings = settings(max_examples=30, stateful_step_count=40, deadline=None)


class LargeStoreModel(StoreModel):
    pass


TestLargeStoreModel = pytest.mark.slow(LargeStoreModel.TestCase)
TestLargeStoreModel.settings = settings(max_examples=250, stateful_step_count=40, deadline=None)
