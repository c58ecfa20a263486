"""
Monitoring module for the COLMA memory engine.
"""

from .metrics import MetricsCollector

__all__ = [
    'MetricsCollector',
]
