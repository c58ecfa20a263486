"""
Record identifiers: 128-bit values rendered as 32 lowercase hex characters.
"""

import random
import re
import threading
import uuid
from typing import Optional

_ID_RE = re.compile(r'^[0-9a-f]{32}$')


def is_record_id(value: str) -> bool:
    return isinstance(value, str) and bool(_ID_RE.match(value))


class IdFactory:
    """Random ids by default; reproducible ids when seeded."""

    def __init__(self, seed: Optional[int] = None):
        self._rng = random.Random(seed) if seed is not None else None
        self._lock = threading.Lock()

    def __call__(self) -> str:
        if self._rng is None:
            return uuid.uuid4().hex
        with self._lock:
            return f"{self._rng.getrandbits(128):032x}"
