"""
Consistent-hash placement and an in-process replicated cluster.

Ring positions are the first 8 bytes of BLAKE2b (digest_size=8) read as a
little-endian unsigned integer. Node ``n`` owns tokens hash(f"{n}#{i}") for
``i`` in range(vnodes_per_node).
"""

import bisect
import hashlib
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from ..core.config import RingConfig, StorageConfig
from ..core.exceptions import ValidationException
from ..core.logger import StructuredLogger
from ..utils.clock import Clock
from .store import Store
from .types import Cell, PartitionKey

log = StructuredLogger(__name__)


def stable_hash(data: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), 'little')


class HashRing:
    """Token ring built from a RingConfig."""

    def __init__(self, config: RingConfig):
        self.config = config
        tokens = []
        for node in config.nodes():
            for vnode in range(config.vnodes_per_node):
                tokens.append((stable_hash(f"{node}#{vnode}".encode('utf-8')), node))
        tokens.sort()
        self._positions = [t for t, _ in tokens]
        self._owners = [n for _, n in tokens]

    def locate(self, partition: PartitionKey) -> List[str]:
        """RF distinct nodes clockwise from the partition's hash."""
        start = bisect.bisect_left(self._positions, stable_hash(partition.to_bytes()))
        wanted = self.config.replication_factor
        replicas: List[str] = []
        for step in range(len(self._owners)):
            node = self._owners[(start + step) % len(self._owners)]
            if node not in replicas:
                replicas.append(node)
                if len(replicas) == wanted:
                    break
        return replicas

    def primary(self, partition: PartitionKey) -> str:
        return self.locate(partition)[0]


@lru_cache(maxsize=32)
def _ring_for(config: RingConfig) -> HashRing:
    return HashRing(config)


def ring_locate(partition: PartitionKey, ring: RingConfig) -> List[str]:
    """Ordered list of replication_factor node ids for a partition."""
    return _ring_for(ring).locate(partition)


def without_node(ring: RingConfig, node_id: str) -> RingConfig:
    """The same ring with one physical node removed."""
    nodes = [n for n in ring.nodes() if n != node_id]
    if len(nodes) == ring.node_count:
        raise ValidationException(f"Unknown node {node_id}")
    return RingConfig(node_count=len(nodes), vnodes_per_node=ring.vnodes_per_node,
                      replication_factor=min(ring.replication_factor, len(nodes)),
                      node_ids=tuple(nodes))


class SimulatedCluster:
    """One Store per node; writes land on the primary and replicas catch up by delta sync."""

    def __init__(self, ring: RingConfig, storage: StorageConfig,
                 base_dir: Union[str, Path], clock: Optional[Clock] = None):
        self.ring = ring
        self.base_dir = Path(base_dir)
        self.nodes: Dict[str, Store] = {
            node: Store.open(storage, clock, self.base_dir / node) for node in ring.nodes()
        }
        self._watermarks: Dict[Tuple[str, str, PartitionKey], int] = {}
        self._partitions: set = set()

    def put(self, partition: PartitionKey, cell: Cell) -> Tuple[str, int]:
        primary = ring_locate(partition, self.ring)[0]
        self._partitions.add(partition)
        return primary, self.nodes[primary].put(partition, cell)

    def get(self, partition: PartitionKey, clustering: bytes, column: str,
            node: Optional[str] = None) -> Optional[Cell]:
        target = node or ring_locate(partition, self.ring)[0]
        return self.nodes[target].get(partition, clustering, column)

    def anti_entropy(self) -> int:
        """Exchange deltas between every replica pair of every known partition."""
        applied = 0
        for partition in sorted(self._partitions):
            replicas = ring_locate(partition, self.ring)
            for source in replicas:
                for target in replicas:
                    if source == target:
                        continue
                    mark = (source, target, partition)
                    batch = self.nodes[source].sync_delta(partition, self._watermarks.get(mark, 0))
                    if batch.mutations:
                        self.nodes[target].apply_delta(batch)
                        self._watermarks[mark] = batch.max_seqno
                        applied += len(batch)
        log.debug("Anti-entropy round", mutations=applied)
        return applied

    def close(self):
        for store in self.nodes.values():
            store.close()
