"""
Utility functions for the COLMA memory engine.
"""

from .serialization import canonical_json, canonical_dumps, digest, b64encode, b64decode, loads
from .clock import Clock, SystemClock, ManualClock
from .ids import IdFactory, is_record_id

__all__ = [
    'canonical_json',
    'canonical_dumps',
    'digest',
    'b64encode',
    'b64decode',
    'loads',
    'Clock',
    'SystemClock',
    'ManualClock',
    'IdFactory',
    'is_record_id',
]
