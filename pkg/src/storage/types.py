"""
Data model of the wide-column store.
"""

from dataclasses import dataclass, field
from functools import total_ordering
from typing import List, Optional, Tuple

from ..core.exceptions import ValidationException
from ..utils.clock import US_PER_SECOND

SEPARATOR = b'\x1f'


@total_ordering
@dataclass(frozen=True)
class PartitionKey:
    """Namespace-qualified partition; ordered bytewise on its serialized form."""
    namespace: str
    entity: str

    def __post_init__(self):
        if not self.namespace or not self.entity:
            raise ValidationException("partition namespace and entity must be non-empty")
        if '\x1f' in self.namespace:
            raise ValidationException("namespace may not contain the 0x1F separator")

    def to_bytes(self) -> bytes:
        return self.namespace.encode('utf-8') + SEPARATOR + self.entity.encode('utf-8')

    @classmethod
    def from_bytes(cls, raw: bytes) -> 'PartitionKey':
        ns, _, entity = raw.partition(SEPARATOR)
        return cls(ns.decode('utf-8'), entity.decode('utf-8'))

    def __lt__(self, other: 'PartitionKey') -> bool:
        if not isinstance(other, PartitionKey):
            return NotImplemented
        return self.to_bytes() < other.to_bytes()

    def __str__(self) -> str:
        return f"{self.namespace}/{self.entity}"


def namespace_prefix(namespace: str) -> bytes:
    return namespace.encode('utf-8') + SEPARATOR


@dataclass(frozen=True)
class Cell:
    clustering: bytes
    column: str
    value: bytes = b''
    timestamp: int = 0
    ttl_s: Optional[int] = None
    tombstone: bool = False

    def __post_init__(self):
        if self.tombstone and self.value:
            raise ValidationException("tombstone cells carry no value")
        if self.ttl_s is not None and self.ttl_s <= 0:
            raise ValidationException("ttl_s must be a positive number of seconds")
        if self.timestamp < 0:
            raise ValidationException("timestamp must be non-negative")

    def expires_at(self) -> Optional[int]:
        if self.ttl_s is None:
            return None
        return self.timestamp + self.ttl_s * US_PER_SECOND

    def expired(self, now_us: int) -> bool:
        expires = self.expires_at()
        return expires is not None and now_us > expires

    def live(self, now_us: int) -> bool:
        return not self.tombstone and not self.expired(now_us)

    def resolution_key(self) -> Tuple[bool, bytes, int]:
        """Order used to settle equal-slot writes arriving from other replicas."""
        return (self.tombstone, self.value, self.ttl_s or 0)


@dataclass(frozen=True)
class Mutation:
    partition: PartitionKey
    cell: Cell
    seqno: int


@dataclass
class MutationBatch:
    partition: PartitionKey
    mutations: List[Mutation] = field(default_factory=list)

    @property
    def max_seqno(self) -> int:
        return max((m.seqno for m in self.mutations), default=0)

    def __len__(self) -> int:
        return len(self.mutations)


@dataclass
class CompactionStats:
    input_segments: List[int] = field(default_factory=list)
    output_segment: Optional[int] = None
    entries_in: int = 0
    entries_out: int = 0

    @property
    def dropped(self) -> int:
        return self.entries_in - self.entries_out

    def to_dict(self) -> dict:
        return {
            'input_segments': list(self.input_segments),
            'output_segment': self.output_segment,
            'entries_in': self.entries_in,
            'entries_out': self.entries_out,
            'dropped': self.dropped,
        }


@dataclass(frozen=True)
class Entry:
    """A stored version: everything a cell holds plus the seqno that wrote it."""
    value: bytes
    ttl_s: Optional[int]
    tombstone: bool
    seqno: int

    def to_cell(self, clustering: bytes, column: str, timestamp: int) -> Cell:
        return Cell(clustering, column, self.value, timestamp, self.ttl_s, self.tombstone)


# Sort key of a stored version: (partition bytes, clustering, column, -timestamp)
SlotKey = Tuple[bytes, bytes, str, int]


def slot_key(pk: bytes, cell: Cell) -> SlotKey:
    return (pk, cell.clustering, cell.column, -cell.timestamp)
