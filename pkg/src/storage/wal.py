"""
Write-ahead log.

Frame layout: [u32 length][u32 CRC32 of payload][payload], little-endian.
"""

import os
import struct
import zlib
from pathlib import Path
from typing import List, Tuple

from ..core.exceptions import ColmaException, StorageException
from ..core.logger import StructuredLogger
from .encoding import decode_mutation, encode_mutation
from .types import Mutation

log = StructuredLogger(__name__)

FRAME_HEADER = struct.Struct('<II')


def frame(payload: bytes) -> bytes:
    return FRAME_HEADER.pack(len(payload), zlib.crc32(payload)) + payload


def parse_frames(data: bytes) -> Tuple[List[Mutation], int]:
    """Decode the CRC-valid prefix of a log image.

    Returns the mutations and the byte length of the valid prefix.
    """
    mutations = []
    offset = 0
    while offset + FRAME_HEADER.size <= len(data):
        length, crc = FRAME_HEADER.unpack_from(data, offset)
        start = offset + FRAME_HEADER.size
        end = start + length
        if end > len(data):
            break
        payload = data[start:end]
        if zlib.crc32(payload) != crc:
            break
        try:
            mutations.append(decode_mutation(payload))
        except ColmaException:
            break
        offset = end
    return mutations, offset


class WriteAheadLog:
    """Append-only mutation log; every append is flushed before it returns."""

    def __init__(self, path: Path, fsync: bool = False):
        self.path = Path(path)
        self.fsync = fsync
        self._file = None

    def replay(self) -> List[Mutation]:
        """Read the log, truncating any torn or corrupt tail."""
        if not self.path.exists():
            self.path.touch()
            return []
        data = self.path.read_bytes()
        mutations, valid = parse_frames(data)
        if valid < len(data):
            log.warning("Truncating torn WAL tail", path=str(self.path),
                        valid_bytes=valid, dropped_bytes=len(data) - valid)
            with open(self.path, 'r+b') as f:
                f.truncate(valid)
        return mutations

    def open(self):
        self._file = open(self.path, 'ab')

    def append(self, mutation: Mutation):
        if self._file is None:
            raise StorageException("WAL is not open")
        try:
            self._file.write(frame(encode_mutation(mutation)))
            self._file.flush()
            if self.fsync:
                os.fsync(self._file.fileno())
        except OSError as e:
            raise StorageException(f"WAL append failed: {e}")

    def reset(self):
        """Discard the log once its contents are sealed in a segment."""
        if self._file is None:
            raise StorageException("WAL is not open")
        self._file.truncate(0)
        self._file.seek(0)
        self._file.flush()
        if self.fsync:
            os.fsync(self._file.fileno())

    def size(self) -> int:
        return self._file.tell() if self._file is not None else 0

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None
