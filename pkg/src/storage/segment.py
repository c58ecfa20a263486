"""
Immutable sorted segment files.

Layout of ``seg-<id>.colm``::

    header   magic "COLM" | u32 format version | u8 codec | u64 index offset
    blocks   [u32 length][u32 CRC32][payload] ...
    index    [u32 length][u32 CRC32][canonical JSON]

Entries are sorted by (partition, clustering, column, timestamp desc).
"""

import bisect
import os
import struct
import zlib
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..core.exceptions import ColmaException, IntegrityException, StorageException
from ..core.logger import StructuredLogger
from ..utils.serialization import canonical_json, loads
from .encoding import StoredVersion, decode_block, encode_block
from .types import Entry, SlotKey

log = StructuredLogger(__name__)

MAGIC = b'COLM'
FORMAT_VERSION = 1
HEADER = struct.Struct('<4sIBQ')
FRAME = struct.Struct('<II')
SEGMENT_SUFFIX = '.colm'


def segment_path(directory: Path, segment_id: int) -> Path:
    return Path(directory) / f"seg-{segment_id}{SEGMENT_SUFFIX}"


def parse_segment_id(path: Path) -> Optional[int]:
    name = path.name
    if not (name.startswith('seg-') and name.endswith(SEGMENT_SUFFIX)):
        return None
    try:
        return int(name[4:-len(SEGMENT_SUFFIX)])
    except ValueError:
        return None


def to_version(key: SlotKey, entry: Entry) -> StoredVersion:
    return (key[0], key[1], key[2], -key[3], entry.value, entry.ttl_s or 0, entry.tombstone, entry.seqno)


def from_version(v: StoredVersion) -> Tuple[SlotKey, Entry]:
    return (v[0], v[1], v[2], -v[3]), Entry(v[4], v[5] or None, v[6], v[7])


class Segment:
    """A sealed segment held in memory after full verification."""

    def __init__(self, segment_id: int, path: Path, codec: int,
                 keys: List[SlotKey], entries: List[Entry],
                 compacted_from: Sequence[int] = (), block_offsets: Sequence[int] = ()):
        self.id = segment_id
        self.path = path
        self.codec = codec
        self.keys = keys
        self.entries = entries
        self.compacted_from = list(compacted_from)
        self.block_index = list(block_offsets)
        self.max_seqno = max((e.seqno for e in entries), default=0)
        self.min_key = keys[0][0] if keys else b''
        self.max_key = keys[-1][0] if keys else b''

    def __len__(self) -> int:
        return len(self.keys)

    def get(self, key: SlotKey) -> Optional[Entry]:
        i = bisect.bisect_left(self.keys, key)
        if i < len(self.keys) and self.keys[i] == key:
            return self.entries[i]
        return None

    def range(self, lo: tuple, hi: tuple) -> List[Tuple[SlotKey, Entry]]:
        """Entries with lo <= key < hi."""
        start = bisect.bisect_left(self.keys, lo)
        end = bisect.bisect_left(self.keys, hi)
        return list(zip(self.keys[start:end], self.entries[start:end]))

    def items(self) -> Iterable[Tuple[SlotKey, Entry]]:
        return zip(self.keys, self.entries)

    def overlaps(self, lo: Optional[bytes], hi: Optional[bytes]) -> bool:
        """Whether the partition span intersects [lo, hi] (None = open)."""
        if not self.keys:
            return False
        if lo is not None and self.max_key < lo:
            return False
        if hi is not None and self.min_key > hi:
            return False
        return True

    def versions(self) -> List[StoredVersion]:
        return [to_version(k, e) for k, e in zip(self.keys, self.entries)]


def write_segment(directory: Path, segment_id: int, items: Sequence[Tuple[SlotKey, Entry]],
                  codec: int, block_entries: int, compacted_from: Sequence[int] = (),
                  fsync: bool = False) -> Segment:
    """Write a segment atomically (temp file + rename)."""
    final = segment_path(directory, segment_id)
    tmp = final.with_name(final.name + '.tmp')
    versions = [to_version(k, e) for k, e in items]
    offsets = []
    try:
        with open(tmp, 'wb') as f:
            f.write(HEADER.pack(MAGIC, FORMAT_VERSION, codec, 0))
            for start in range(0, len(versions), block_entries):
                payload = encode_block(versions[start:start + block_entries], codec)
                offsets.append(f.tell())
                f.write(FRAME.pack(len(payload), zlib.crc32(payload)) + payload)
            index_offset = f.tell()
            index = canonical_json({
                'id': segment_id,
                'count': len(versions),
                'blocks': offsets,
                'max_seqno': max((v[7] for v in versions), default=0),
                'compacted_from': sorted(compacted_from),
                'min_key': versions[0][0].hex() if versions else '',
                'max_key': versions[-1][0].hex() if versions else '',
            })
            f.write(FRAME.pack(len(index), zlib.crc32(index)) + index)
            f.seek(0)
            f.write(HEADER.pack(MAGIC, FORMAT_VERSION, codec, index_offset))
            f.flush()
            if fsync:
                os.fsync(f.fileno())
        os.replace(tmp, final)
    except OSError as e:
        try:
            tmp.unlink()
        except OSError:
            pass
        raise StorageException(f"Failed to write segment {segment_id}: {e}")

    keys = [k for k, _ in items]
    entries = [e for _, e in items]
    log.debug("Segment sealed", segment_id=segment_id, entries=len(keys), codec=codec)
    return Segment(segment_id, final, codec, keys, entries, compacted_from, offsets)


def _read_frame(data: bytes, offset: int, what: str) -> bytes:
    if offset + FRAME.size > len(data):
        raise IntegrityException(f"{what} frame header truncated")
    length, crc = FRAME.unpack_from(data, offset)
    start = offset + FRAME.size
    payload = data[start:start + length]
    if len(payload) != length:
        raise IntegrityException(f"{what} frame truncated")
    if zlib.crc32(payload) != crc:
        raise IntegrityException(f"{what} checksum mismatch")
    return payload


def read_segment(path: Path) -> Tuple[Dict, List[List[StoredVersion]]]:
    """Parse and verify a segment file, returning its index and decoded blocks."""
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise IntegrityException(f"Segment {path} truncated", {'path': str(path)})
    magic, version, codec, index_offset = HEADER.unpack_from(data, 0)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise IntegrityException(f"Segment {path} has a bad header", {'path': str(path)})
    try:
        index = loads(_read_frame(data, index_offset, 'index'))
        blocks = []
        for offset in index['blocks']:
            blocks.append(decode_block(_read_frame(data, offset, 'block'), codec))
    except (ColmaException, KeyError, TypeError, UnicodeDecodeError) as e:
        raise IntegrityException(f"Segment {path} failed verification: {e}", {'path': str(path)})
    if sum(len(b) for b in blocks) != index.get('count'):
        raise IntegrityException(f"Segment {path} entry count mismatch", {'path': str(path)})
    index['codec'] = codec
    return index, blocks


def load_segment(path: Path) -> Segment:
    index, blocks = read_segment(path)
    keys = []
    entries = []
    for block in blocks:
        for v in block:
            key, entry = from_version(v)
            keys.append(key)
            entries.append(entry)
    if any(keys[i] >= keys[i + 1] for i in range(len(keys) - 1)):
        raise IntegrityException(f"Segment {path} is not sorted", {'path': str(path)})
    return Segment(index['id'], Path(path), index['codec'], keys, entries,
                   index.get('compacted_from', []), index['blocks'])
