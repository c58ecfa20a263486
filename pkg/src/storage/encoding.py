"""
Binary encodings: mutation payloads, varints and segment block codecs.

All multibyte integers are little-endian. Byte strings are length-prefixed.
"""

import struct
from typing import Iterable, List, Tuple

from ..core.exceptions import IntegrityException
from .types import Cell, Mutation, PartitionKey

CODEC_NONE = 0
CODEC_PREFIX_VARINT = 1

_U32 = struct.Struct('<I')
_I64 = struct.Struct('<q')
_U64 = struct.Struct('<Q')

# (pk, clustering, column, timestamp, value, ttl_s or 0, tombstone, seqno)
StoredVersion = Tuple[bytes, bytes, str, int, bytes, int, bool, int]


class Reader:
    """Cursor over a byte buffer raising IntegrityException on overrun."""

    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.pos = offset

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if n < 0 or end > len(self.data):
            raise IntegrityException("truncated record")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def i64(self) -> int:
        return _I64.unpack(self.take(8))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def varint(self) -> int:
        result = 0
        shift = 0
        while True:
            byte = self.u8()
            result |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return result
            shift += 7
            if shift > 63:
                raise IntegrityException("varint too long")

    def vblob(self) -> bytes:
        return self.take(self.varint())

    def at_end(self) -> bool:
        return self.pos >= len(self.data)


def _blob(data: bytes) -> bytes:
    return _U32.pack(len(data)) + data


def varint(value: int) -> bytes:
    if value < 0:
        raise ValueError("varint requires a non-negative integer")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def zigzag(value: int) -> int:
    return (value << 1) ^ (value >> 63)


def unzigzag(value: int) -> int:
    return (value >> 1) ^ -(value & 1)


def encode_mutation(mutation: Mutation) -> bytes:
    """Canonical payload, fields in declaration order: partition, cell, seqno."""
    cell = mutation.cell
    return b''.join((
        _blob(mutation.partition.namespace.encode('utf-8')),
        _blob(mutation.partition.entity.encode('utf-8')),
        _blob(cell.clustering),
        _blob(cell.column.encode('utf-8')),
        _blob(cell.value),
        _I64.pack(cell.timestamp),
        _U32.pack(cell.ttl_s or 0),
        bytes((1 if cell.tombstone else 0,)),
        _U64.pack(mutation.seqno),
    ))


def decode_mutation(payload: bytes) -> Mutation:
    r = Reader(payload)
    try:
        namespace = r.blob().decode('utf-8')
        entity = r.blob().decode('utf-8')
        clustering = r.blob()
        column = r.blob().decode('utf-8')
        value = r.blob()
        timestamp = r.i64()
        ttl = r.u32()
        tombstone = r.u8()
        seqno = r.u64()
    except UnicodeDecodeError as e:
        raise IntegrityException(f"invalid text in mutation: {e}")
    if not r.at_end() or tombstone > 1:
        raise IntegrityException("malformed mutation payload")
    cell = Cell(clustering, column, value, timestamp, ttl or None, bool(tombstone))
    return Mutation(PartitionKey(namespace, entity), cell, seqno)


def _composite_key(version: StoredVersion) -> bytes:
    pk, clustering, column = version[0], version[1], version[2]
    return varint(len(pk)) + pk + varint(len(clustering)) + clustering + column.encode('utf-8')


def _split_composite(key: bytes) -> Tuple[bytes, bytes, str]:
    r = Reader(key)
    pk = r.vblob()
    clustering = r.vblob()
    column = key[r.pos:].decode('utf-8')
    return pk, clustering, column


def encode_block(versions: Iterable[StoredVersion], codec: int) -> bytes:
    if codec == CODEC_NONE:
        return b''.join(_encode_plain(v) for v in versions)
    if codec == CODEC_PREFIX_VARINT:
        return _encode_prefixed(versions)
    raise IntegrityException(f"unknown codec {codec}")


def decode_block(payload: bytes, codec: int) -> List[StoredVersion]:
    if codec == CODEC_NONE:
        return _decode_plain(payload)
    if codec == CODEC_PREFIX_VARINT:
        return _decode_prefixed(payload)
    raise IntegrityException(f"unknown codec {codec}")


def _encode_plain(v: StoredVersion) -> bytes:
    pk, clustering, column, ts, value, ttl, tombstone, seqno = v
    return b''.join((
        _blob(pk), _blob(clustering), _blob(column.encode('utf-8')),
        _I64.pack(ts), _blob(value), _U32.pack(ttl),
        bytes((1 if tombstone else 0,)), _U64.pack(seqno),
    ))


def _decode_plain(payload: bytes) -> List[StoredVersion]:
    r = Reader(payload)
    out = []
    while not r.at_end():
        pk = r.blob()
        clustering = r.blob()
        column = r.blob().decode('utf-8')
        ts = r.i64()
        value = r.blob()
        ttl = r.u32()
        tombstone = bool(r.u8())
        seqno = r.u64()
        out.append((pk, clustering, column, ts, value, ttl, tombstone, seqno))
    return out


def _encode_prefixed(versions: Iterable[StoredVersion]) -> bytes:
    out = bytearray()
    previous = b''
    for v in versions:
        key = _composite_key(v)
        shared = 0
        limit = min(len(key), len(previous))
        while shared < limit and key[shared] == previous[shared]:
            shared += 1
        suffix = key[shared:]
        out += varint(shared) + varint(len(suffix)) + suffix
        out += varint(zigzag(v[3])) + varint(v[5]) + bytes((1 if v[6] else 0,))
        out += varint(v[7]) + varint(len(v[4])) + v[4]
        previous = key
    return bytes(out)


def _decode_prefixed(payload: bytes) -> List[StoredVersion]:
    r = Reader(payload)
    out = []
    previous = b''
    while not r.at_end():
        shared = r.varint()
        if shared > len(previous):
            raise IntegrityException("prefix longer than previous key")
        key = previous[:shared] + r.vblob()
        pk, clustering, column = _split_composite(key)
        ts = unzigzag(r.varint())
        ttl = r.varint()
        tombstone = bool(r.u8())
        seqno = r.varint()
        value = r.vblob()
        out.append((pk, clustering, column, ts, value, ttl, tombstone, seqno))
        previous = key
    return out
