"""
Coordination layer: tiering of memory records.
"""

from .policy import retention_score, decay_rate
from .coordinator import Coordinator, Stimulus, TickReport

__all__ = [
    'retention_score',
    'decay_rate',
    'Coordinator',
    'Stimulus',
    'TickReport',
]
