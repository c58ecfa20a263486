"""
Time sources. All engine timestamps are integer microseconds since epoch.
"""

import threading
import time
from typing import Protocol

US_PER_SECOND = 1_000_000
US_PER_DAY = 86400 * US_PER_SECOND


class Clock(Protocol):
    def now_us(self) -> int: ...


class SystemClock:
    """Wall clock, forced monotone so two reads never go backwards."""

    def __init__(self):
        self._last = 0
        self._lock = threading.Lock()

    def now_us(self) -> int:
        with self._lock:
            self._last = max(self._last, time.time_ns() // 1000)
            return self._last


class ManualClock:
    """Clock driven by the caller; used by tests and scenario scripts."""

    def __init__(self, start_us: int = 0, step_us: int = 0):
        self._now = start_us
        self._step = step_us
        self._lock = threading.Lock()

    def now_us(self) -> int:
        with self._lock:
            now = self._now
            self._now += self._step
            return now

    def set(self, now_us: int):
        with self._lock:
            if now_us < self._now:
                raise ValueError("clock cannot move backwards")
            self._now = now_us

    def advance(self, seconds: float = 0.0, micros: int = 0):
        with self._lock:
            self._now += int(seconds * US_PER_SECOND) + micros
