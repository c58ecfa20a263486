"""
In-memory write buffer ordered by slot key.
"""

from typing import Iterator, List, Optional, Tuple

from sortedcontainers import SortedDict

from .types import Entry, SlotKey

_ENTRY_OVERHEAD = 64


class Memtable:
    """Sorted map of (partition, clustering, column, -timestamp) -> Entry."""

    def __init__(self):
        self._data = SortedDict()
        self._bytes = 0
        self.max_seqno = 0

    def put(self, key: SlotKey, entry: Entry):
        previous = self._data.get(key)
        if previous is not None:
            self._bytes -= len(previous.value) + _ENTRY_OVERHEAD
        else:
            self._bytes += len(key[0]) + len(key[1]) + len(key[2])
        self._data[key] = entry
        self._bytes += len(entry.value) + _ENTRY_OVERHEAD
        self.max_seqno = max(self.max_seqno, entry.seqno)

    def get(self, key: SlotKey) -> Optional[Entry]:
        return self._data.get(key)

    def range(self, lo: tuple, hi: tuple) -> List[Tuple[SlotKey, Entry]]:
        """Copy of the entries with lo <= key < hi."""
        return [(k, self._data[k]) for k in self._data.irange(lo, hi, inclusive=(True, False))]

    def items(self) -> Iterator[Tuple[SlotKey, Entry]]:
        return iter(self._data.items())

    def clear(self):
        self._data.clear()
        self._bytes = 0
        self.max_seqno = 0

    @property
    def approximate_bytes(self) -> int:
        return self._bytes

    def __len__(self) -> int:
        return len(self._data)
