"""
Storage engine: write-ahead log, memtable, sealed segments, placement ring.
"""

from .types import Cell, CompactionStats, Mutation, MutationBatch, PartitionKey
from .store import Store, open_store
from .ring import HashRing, SimulatedCluster, ring_locate, stable_hash, without_node

__all__ = [
    'Cell',
    'CompactionStats',
    'Mutation',
    'MutationBatch',
    'PartitionKey',
    'Store',
    'open_store',
    'HashRing',
    'SimulatedCluster',
    'ring_locate',
    'stable_hash',
    'without_node',
]
