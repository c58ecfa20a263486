"""
Consistent-hash placement and the simulated cluster.
"""

from collections import Counter

import pytest

from src.core.config import RingConfig, StorageConfig
from src.core.exceptions import ValidationException
from src.storage.ring import HashRing, SimulatedCluster, ring_locate, stable_hash, without_node
from src.storage.types import Cell, PartitionKey
from src.utils.clock import ManualClock

PARTITIONS = [PartitionKey("ns", f"entity-{i}") for i in range(5000)]


def test_stable_hash_is_deterministic():
    assert stable_hash(b"node-0#0") == stable_hash(b"node-0#0")
    assert stable_hash(b"node-0#0") != stable_hash(b"node-0#1")
    assert 0 <= stable_hash(b"x") < 2 ** 64


def test_locate_returns_distinct_replicas():
    ring = RingConfig(node_count=5, replication_factor=3)
    for partition in PARTITIONS[:200]:
        replicas = ring_locate(partition, ring)
        assert len(replicas) == 3
        assert len(set(replicas)) == 3
        assert replicas == ring_locate(partition, ring)


def test_primaries_are_balanced():
    ring = HashRing(RingConfig(node_count=4, vnodes_per_node=64))
    shares = Counter(ring.primary(p) for p in PARTITIONS)
    assert set(shares) == {"node-0", "node-1", "node-2", "node-3"}
    for count in shares.values():
        assert 0.15 <= count / len(PARTITIONS) <= 0.35


def test_removing_a_node_moves_only_its_partitions():
    ring = RingConfig(node_count=4, vnodes_per_node=64)
    smaller = without_node(ring, "node-3")
    assert smaller.nodes() == ["node-0", "node-1", "node-2"]
    moved = 0
    for partition in PARTITIONS:
        before = ring_locate(partition, ring)[0]
        after = ring_locate(partition, smaller)[0]
        if before != "node-3":
            assert after == before
        else:
            moved += 1
            assert after != "node-3"
    assert 0.1 <= moved / len(PARTITIONS) <= 0.4


def test_without_unknown_node_rejected():
    with pytest.raises(ValidationException):
        without_node(RingConfig(node_count=2), "node-9")


def test_replication_factor_bounded_by_nodes():
    with pytest.raises(ValueError):
        RingConfig(node_count=2, replication_factor=3)


def test_cluster_anti_entropy_fills_replicas(tmp_path):
    ring = RingConfig(node_count=3, replication_factor=2)
    clock = ManualClock(1_700_000_000_000_000)
    storage = StorageConfig(auto_compact_segments=0)
    cluster = SimulatedCluster(ring, storage, tmp_path, clock)
    try:
        partitions = PARTITIONS[:30]
        for i, partition in enumerate(partitions):
            cluster.put(partition, Cell(b'row', 'v', str(i).encode(), clock.now_us()))
        assert cluster.anti_entropy() >= 30
        assert cluster.anti_entropy() == 0
        for i, partition in enumerate(partitions):
            for node in ring_locate(partition, ring):
                assert cluster.get(partition, b'row', 'v', node=node).value == str(i).encode()
    finally:
        cluster.close()
